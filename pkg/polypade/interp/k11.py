import cmath
import logging
from typing import Any, Optional
from dataclasses import dataclass

import numpy as np

from polypade.series.polyseries import (
    TruncatedPoly,
    RationalFunction,
    cayley_forward,
)

logger = logging.getLogger(__name__)

K11_BOUNDARY_TOL = 1e-12

# coefficient c_ab sits at exponent (b, a): c10 multiplies z, c01 multiplies w
Z = (1, 0)
W = (0, 1)
ZW = (1, 1)
ONE = (0, 0)


class DegenerateBranch(ValueError):
    """4 - |c10|^2 - |c01|^2 vanishes, so the rational solution degenerates to one variable."""


class DomainViolation(ValueError):
    """A half-plane coefficient is outside the open right half-plane."""


class NotInK11(ValueError):
    """The coefficients fail the K11 membership inequalities."""


@dataclass(frozen=True)
class K11Point:
    """Coefficients of 1 + c10 z + c01 w + c11 zw (with c00 for the unnormalized case)."""

    c01: complex
    c10: complex
    c11: complex
    c00: complex = 1.0

    @classmethod
    def from_table(cls, table: TruncatedPoly) -> "K11Point":
        if table.d != 2:
            raise ValueError(f"K11 needs two variables, got {table.d}")
        return cls(table[W], table[Z], table[ZW], table[ONE])

    def to_table(self) -> TruncatedPoly:
        return TruncatedPoly.from_mapping({ONE: self.c00, Z: self.c10, W: self.c01, ZW: self.c11}, (1, 1))


def k11_point_from_table(table: TruncatedPoly) -> K11Point:
    return K11Point.from_table(table)


@dataclass(frozen=True)
class K11Verdict:
    member: bool
    slack1: float
    slack2: float


def k11_check(c01: complex, c10: complex, c11: complex, tol: float = K11_BOUNDARY_TOL) -> K11Verdict:
    """
    Membership of (1, c01, c10, c11) in the coefficient body of the two-variable
    Caratheodory class:

        2 |c11 - c10 c01| + |c10|^2 + |c01|^2 <= 4  and  |c10| + |c01| <= 2
    """
    slack1 = 4 - (2 * abs(c11 - c10 * c01) + abs(c10) ** 2 + abs(c01) ** 2)
    slack2 = 2 - (abs(c10) + abs(c01))
    return K11Verdict(slack1 >= -tol and slack2 >= -tol, float(slack1), float(slack2))


@dataclass(frozen=True, eq=False)
class K11Interpolant:
    """
    Caratheodory function phi = (1 + g)/(1 - g) with prescribed c01, c10, c11.

    `sigma` is set on the main branch, `tau` on the one-variable boundary witness.
    """

    g: RationalFunction
    sigma: Optional[complex] = None
    tau: Optional[complex] = None

    @property
    def witness(self) -> bool:
        return self.tau is not None

    def __call__(self, points: np.ndarray) -> Any:
        g = self.g(points)
        return (1 + g) / (1 - g)

    def taylor(self, bound: tuple[int, int] = (1, 1)) -> TruncatedPoly:
        return cayley_forward(self.g.taylor(bound))


def _sigma(c01: complex, c10: complex, c11: complex) -> complex:
    rest = 4 - abs(c10) ** 2 - abs(c01) ** 2
    if rest <= K11_BOUNDARY_TOL:
        raise DegenerateBranch(f"4 - |c10|^2 - |c01|^2 = {rest:.3e}")
    return 2 * (c11 - c10 * c01) / rest


def _boundary_witness(c01: complex, c10: complex) -> K11Interpolant:
    # one of c01, c10 vanishes on this branch; keep the larger
    alpha, tau = (W, c01 / 2) if abs(c01) >= abs(c10) else (Z, c10 / 2)
    num = TruncatedPoly.from_mapping({alpha: tau}, (1, 1))
    den = TruncatedPoly.monomial((1, 1), ONE)
    logger.debug(f"Boundary witness in {'w' if alpha == W else 'z'} with tau = {tau}")
    return K11Interpolant(RationalFunction(num, den), tau=tau)


def k11_construct(c01: complex, c10: complex, c11: complex) -> K11Interpolant:
    """
    Explicit rational solution of the order-(1, 1) Caratheodory-Fejer problem.

    g = (c10 z / 2 + c01 w / 2 + sigma zw) / (1 + sigma (conj(c01) z + conj(c10) w) / 2)
    with sigma = 2 (c11 - c10 c01) / (4 - |c10|^2 - |c01|^2).

    :raises NotInK11: if the point fails k11_check
    """
    verdict = k11_check(c01, c10, c11)
    if not verdict.member:
        raise NotInK11(f"Point is outside K11 (slacks {verdict.slack1:.3e}, {verdict.slack2:.3e})")
    try:
        sigma = _sigma(c01, c10, c11)
    except DegenerateBranch as e:
        logger.debug(f"{e}, switching to the boundary witness")
        return _boundary_witness(c01, c10)
    num = TruncatedPoly.from_mapping({Z: c10 / 2, W: c01 / 2, ZW: sigma}, (1, 1))
    den = TruncatedPoly.from_mapping(
        {ONE: 1.0, Z: sigma * np.conj(c01) / 2, W: sigma * np.conj(c10) / 2}, (1, 1)
    )
    return K11Interpolant(RationalFunction(num, den), sigma=sigma)


@dataclass(frozen=True)
class HalfPlaneMobius:
    """
    Phi(z) = (A z + B)/(C z + D), an automorphism of the right half-plane,
    together with its first two derivatives at `anchor`.
    """

    a: complex
    b: complex
    c: complex
    d: complex
    anchor: complex = 1.0

    def __post_init__(self) -> None:
        if abs(self.det) < 1e-15:
            raise ValueError("Degenerate Mobius map (AD - BC = 0)")

    @property
    def det(self) -> complex:
        return self.a * self.d - self.b * self.c

    def __call__(self, z: Any) -> Any:
        return (self.a * z + self.b) / (self.c * z + self.d)

    def derivative(self, z: Any) -> Any:
        return self.det / (self.c * z + self.d) ** 2

    def second_derivative(self, z: Any) -> Any:
        return -2 * self.det * self.c / (self.c * z + self.d) ** 3

    @property
    def d1(self) -> complex:
        return complex(self.derivative(self.anchor))

    @property
    def d2(self) -> complex:
        return complex(self.second_derivative(self.anchor))


def mobius_from_c00(c00: complex) -> HalfPlaneMobius:
    """
    The half-plane automorphism sending c00 to 1, built from gamma = (c00 - 1)/(c00 + 1).

    :raises DomainViolation: unless Re c00 > 0
    """
    if not complex(c00).real > 0:
        raise DomainViolation(f"Re c00 = {complex(c00).real} must be positive")
    gamma = (c00 - 1) / (c00 + 1)
    gbar = np.conj(gamma)
    return HalfPlaneMobius(2 - gamma - gbar, gbar - gamma, gamma - gbar, 2 + gamma + gbar, anchor=c00)


def rhp_rotation(theta: float) -> HalfPlaneMobius:
    """Half-plane automorphism fixing 1 with Phi'(1) = exp(i theta)."""
    e = cmath.exp(1j * theta)
    return HalfPlaneMobius(1 + e, 1 - e, 1 - e, 1 + e, anchor=1.0)


def automorphism_transform(point: K11Point, d1: complex, d2: complex) -> K11Point:
    """Coefficients of Phi(phi) given Phi(c00) = 1 and the derivatives of Phi at c00."""
    return K11Point(d1 * point.c01, d1 * point.c10, d2 * point.c01 * point.c10 + d1 * point.c11)


def cf2_general_check(
    c00: complex, c01: complex, c10: complex, c11: complex, tol: float = K11_BOUNDARY_TOL
) -> bool:
    """
    Membership of an unnormalized coefficient set with Re c00 > 0, from the
    closed form obtained by pushing it through mobius_from_c00.
    """
    mobius = mobius_from_c00(c00)
    dp, ddp = mobius.d1, mobius.d2
    first = 2 * abs(ddp * c01 * c10 + dp * c11 - dp**2 * c10 * c01) + abs(dp) ** 2 * (
        abs(c10) ** 2 + abs(c01) ** 2
    )
    second = abs(dp) * (abs(c10) + abs(c01))
    return bool(first <= 4 + tol and second <= 2 + tol)


if __name__ == "__main__":
    logging.basicConfig()
    logger.level = logging.DEBUG
    interp = k11_construct(0.5, 0.5, 0.5)
    logger.info(f"sigma = {interp.sigma}, taylor = {interp.taylor().support(1e-12)}")

import logging
import itertools
from typing import Any, Union, Mapping, Optional, Sequence
from functools import cached_property
from dataclasses import field, replace, dataclass

import numpy as np

from polypade.types import Evaluator

logger = logging.getLogger(__name__)

MultiIndex = tuple[int, ...]
BoxLike = Union["MultiIndexBox", Sequence[int], int]

DEGENERATE_POLE_TOL = 1e-12
TAYLOR_RADIUS = 0.5
TAYLOR_GRID_PAD = 41


class BoxMismatch(ValueError):
    """Operands live on boxes that do not fit inside the requested output box."""


class DegeneratePole(ValueError):
    """A series division hit a denominator whose constant term vanishes."""


class GridTooSmall(ValueError):
    """A sampling grid is too coarse to resolve the requested coefficients."""


def as_multi_index(n: Union[Sequence[int], int]) -> MultiIndex:
    if isinstance(n, (int, np.integer)):
        n = (int(n),)
    idx = tuple(int(k) for k in n)
    if len(idx) == 0:
        raise ValueError("A multi-index needs at least one component!")
    if any(k < 0 for k in idx):
        raise ValueError(f"Multi-index {idx} has negative components!")
    return idx


def graded_lex_key(alpha: Sequence[int]) -> tuple[int, tuple[int, ...]]:
    """Total degree first, then lexicographic with the first variable leading."""
    return sum(alpha), tuple(-a for a in alpha)


@dataclass(frozen=True)
class MultiIndexBox:
    """The index set {beta : 0 <= beta <= bound} in graded-lexicographic order."""

    bound: MultiIndex

    def __post_init__(self) -> None:
        object.__setattr__(self, "bound", as_multi_index(self.bound))

    @property
    def d(self) -> int:
        return len(self.bound)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(k + 1 for k in self.bound)

    @cached_property
    def indices(self) -> tuple[MultiIndex, ...]:
        grid = itertools.product(*(range(k + 1) for k in self.bound))
        return tuple(sorted(grid, key=graded_lex_key))

    @cached_property
    def position(self) -> dict[MultiIndex, int]:
        return {alpha: i for i, alpha in enumerate(self.indices)}

    @cached_property
    def index_array(self) -> np.ndarray:
        """(len, d) integer array of the indices in box order."""
        return np.array(self.indices, dtype=int).reshape(len(self.indices), self.d)

    @cached_property
    def dense_positions(self) -> tuple[np.ndarray, ...]:
        """Fancy index into a dense array of `shape`, in box order."""
        return tuple(self.index_array.T)

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, alpha: object) -> bool:
        if not isinstance(alpha, tuple) or len(alpha) != self.d:
            return False
        return all(0 <= a <= n for a, n in zip(alpha, self.bound))

    def contains(self, other: "MultiIndexBox") -> bool:
        return other.d == self.d and all(a <= b for a, b in zip(other.bound, self.bound))

    def scaled(self, k: int) -> "MultiIndexBox":
        return MultiIndexBox(tuple(k * n for n in self.bound))


def enumerate_box(n: BoxLike) -> MultiIndexBox:
    if isinstance(n, MultiIndexBox):
        return n
    return MultiIndexBox(as_multi_index(n))


@dataclass(frozen=True, eq=False)
class TruncatedPoly:
    """
    Coefficients of a power series in d variables kept on a box.

    `coeffs` is flat and follows `box.indices`.
    """

    box: MultiIndexBox
    coeffs: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.coeffs, dtype=complex).reshape(-1)
        if arr.shape[0] != len(self.box):
            raise ValueError(
                f"Expected {len(self.box)} coefficients for box {self.box.bound}, got {arr.shape[0]}"
            )
        arr.setflags(write=False)
        object.__setattr__(self, "coeffs", arr)

    @classmethod
    def zeros(cls, box: BoxLike) -> "TruncatedPoly":
        box = enumerate_box(box)
        return TruncatedPoly(box, np.zeros(len(box), dtype=complex))

    @classmethod
    def monomial(cls, box: BoxLike, alpha: Sequence[int], value: complex = 1.0) -> "TruncatedPoly":
        box = enumerate_box(box)
        alpha = tuple(alpha)
        if alpha not in box:
            raise BoxMismatch(f"Monomial {alpha} is outside box {box.bound}")
        coeffs = np.zeros(len(box), dtype=complex)
        coeffs[box.position[alpha]] = value
        return TruncatedPoly(box, coeffs)

    @classmethod
    def from_mapping(
        cls, mapping: Mapping[Sequence[int], complex], box: Optional[BoxLike] = None
    ) -> "TruncatedPoly":
        terms = {tuple(int(a) for a in k): complex(v) for k, v in mapping.items()}
        if box is None:
            if not terms:
                raise ValueError("Cannot infer a box from an empty mapping!")
            dims = {len(k) for k in terms}
            if len(dims) != 1:
                raise ValueError(f"Mixed index lengths {sorted(dims)} in mapping")
            box = tuple(max(k[j] for k in terms) for j in range(dims.pop()))
        box = enumerate_box(box)
        coeffs = np.zeros(len(box), dtype=complex)
        for alpha, value in terms.items():
            if alpha not in box:
                raise BoxMismatch(f"Index {alpha} is outside box {box.bound}")
            coeffs[box.position[alpha]] += value
        return TruncatedPoly(box, coeffs)

    @classmethod
    def from_dense(cls, dense: np.ndarray, box: Optional[BoxLike] = None) -> "TruncatedPoly":
        dense = np.asarray(dense, dtype=complex)
        box = enumerate_box(tuple(s - 1 for s in dense.shape) if box is None else box)
        if dense.shape != box.shape:
            raise ValueError(f"Dense array shape {dense.shape} does not match box shape {box.shape}")
        return TruncatedPoly(box, dense[box.dense_positions])

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def bound(self) -> MultiIndex:
        return self.box.bound

    def dense(self) -> np.ndarray:
        out = np.zeros(self.box.shape, dtype=complex)
        out[self.box.dense_positions] = self.coeffs
        return out

    def __getitem__(self, alpha: Sequence[int]) -> complex:
        alpha = tuple(alpha)
        if alpha not in self.box:
            return 0j
        return complex(self.coeffs[self.box.position[alpha]])

    def restrict(self, box: BoxLike) -> Any:
        """Same series kept on another box; missing coefficients are zero."""
        box = enumerate_box(box)
        if box.d != self.d:
            raise BoxMismatch(f"Cannot move a {self.d}-variable series onto box {box.bound}")
        src = self.dense()
        out = np.zeros(box.shape, dtype=complex)
        common = tuple(slice(0, min(a, b)) for a, b in zip(src.shape, box.shape))
        out[common] = src[common]
        return replace(self, box=box, coeffs=out[box.dense_positions])

    def norm(self) -> float:
        return float(np.linalg.norm(self.coeffs))

    def support(self, tol: float = 0.0) -> dict[MultiIndex, complex]:
        return {a: complex(c) for a, c in zip(self.box.indices, self.coeffs) if abs(c) > tol}

    def _check_same_box(self, other: "TruncatedPoly") -> None:
        if other.box != self.box:
            raise BoxMismatch(f"Boxes differ: {self.box.bound} vs {other.box.bound}")

    def __add__(self, other: "TruncatedPoly") -> "TruncatedPoly":
        self._check_same_box(other)
        return TruncatedPoly(self.box, self.coeffs + other.coeffs)

    def __sub__(self, other: "TruncatedPoly") -> "TruncatedPoly":
        self._check_same_box(other)
        return TruncatedPoly(self.box, self.coeffs - other.coeffs)

    def __neg__(self) -> "TruncatedPoly":
        return TruncatedPoly(self.box, -self.coeffs)

    def __mul__(self, scalar: complex) -> "TruncatedPoly":
        return TruncatedPoly(self.box, self.coeffs * complex(scalar))

    __rmul__ = __mul__

    def __call__(self, points: np.ndarray) -> Any:
        return eval_poly(self, points)

    def to_json(self) -> list[dict[str, Any]]:
        return [
            {"alpha": list(alpha), "re": value.real, "im": value.imag}
            for alpha, value in self.support().items()
        ]

    @classmethod
    def from_json(
        cls, items: Sequence[Mapping[str, Any]], bound: Optional[Sequence[int]] = None
    ) -> "TruncatedPoly":
        mapping: dict[MultiIndex, complex] = {}
        for item in items:
            alpha = tuple(int(a) for a in item["alpha"])
            mapping[alpha] = mapping.get(alpha, 0j) + complex(item.get("re", 0.0), item.get("im", 0.0))
        return cls.from_mapping(mapping, bound)


@dataclass(frozen=True, eq=False)
class FourierTable(TruncatedPoly):
    """Taylor coefficients recovered by sampling, with an aliasing error estimate."""

    trunc_error_estimate: float = 0.0

    def __post_init__(self) -> None:
        super().__post_init__()
        if not self.trunc_error_estimate >= 0:
            raise ValueError(f"Invalid truncation error estimate {self.trunc_error_estimate}")

    @classmethod
    def from_poly(cls, p: TruncatedPoly, trunc_error_estimate: float = 0.0) -> "FourierTable":
        return cls(p.box, p.coeffs, trunc_error_estimate)


def _as_table(p: TruncatedPoly, estimate: float) -> FourierTable:
    return FourierTable(p.box, p.coeffs, float(estimate))


def _mul_dense(a: np.ndarray, b: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    out = np.zeros(shape, dtype=complex)
    for alpha in zip(*np.nonzero(a)):
        extent = tuple(min(bs, s - al) for bs, s, al in zip(b.shape, shape, alpha))
        if any(e <= 0 for e in extent):
            continue
        dst = tuple(slice(al, al + e) for al, e in zip(alpha, extent))
        src = tuple(slice(0, e) for e in extent)
        out[dst] += a[alpha] * b[src]
    return out


def poly_mul_trunc(p: TruncatedPoly, q: TruncatedPoly, out_box: BoxLike) -> TruncatedPoly:
    """
    Product of two series keeping only the coefficients inside `out_box`.

    :param p: left factor
    :param q: right factor
    :param out_box: output box, must contain the boxes of both factors
    :raises BoxMismatch: if either factor does not fit in `out_box`
    :return: the truncated product
    """
    out_box = enumerate_box(out_box)
    for name, f in (("p", p), ("q", q)):
        if not out_box.contains(f.box):
            raise BoxMismatch(f"Factor {name} on box {f.bound} does not fit in {out_box.bound}")
    return TruncatedPoly.from_dense(_mul_dense(p.dense(), q.dense(), out_box.shape), out_box)


def series_inverse(p: TruncatedPoly, box: Optional[BoxLike] = None) -> TruncatedPoly:
    """1/p on `box` by a truncated Neumann series around the constant term."""
    box = p.box if box is None else enumerate_box(box)
    c0 = p[(0,) * p.d]
    if abs(c0) < DEGENERATE_POLE_TOL:
        raise DegeneratePole(f"Constant term {c0} is too small to invert")
    u = p.restrict(box).dense() / c0
    u.flat[0] = 0.0
    one = np.zeros(box.shape, dtype=complex)
    one.flat[0] = 1.0
    acc = one.copy()
    # u has no constant term so u^k vanishes on the box once k exceeds the top total degree
    for _ in range(sum(box.bound)):
        acc = one - _mul_dense(u, acc, box.shape)
    return TruncatedPoly.from_dense(acc / c0, box)


def series_divide(num: TruncatedPoly, den: TruncatedPoly, box: BoxLike) -> TruncatedPoly:
    box = enumerate_box(box)
    return poly_mul_trunc(num.restrict(box), series_inverse(den, box), box)


def reflect(p: TruncatedPoly, n: Optional[Sequence[int]] = None) -> TruncatedPoly:
    """
    Reflected polynomial p*(z) = z^n conj(p(1/conj(z))).

    Coefficientwise (p*)_beta = conj(p_{n - beta}).
    """
    box = p.box if n is None else enumerate_box(as_multi_index(n))
    if not box.contains(p.box):
        raise BoxMismatch(f"Polynomial on box {p.bound} does not fit in reflection box {box.bound}")
    dense = p.restrict(box).dense()
    flipped = np.conj(dense[tuple(slice(None, None, -1) for _ in range(box.d))])
    return TruncatedPoly.from_dense(flipped, box)


def _unit(box: MultiIndexBox) -> TruncatedPoly:
    return TruncatedPoly.monomial(box, (0,) * box.d)


def cayley_forward(f: TruncatedPoly) -> FourierTable:
    """Coefficients of (1 + f)/(1 - f), mapping the Schur class to the Caratheodory class."""
    one = _unit(f.box)
    g = poly_mul_trunc(one + f, series_inverse(one - f), f.box)
    c0 = f[(0,) * f.d]
    estimate = getattr(f, "trunc_error_estimate", 0.0)
    return _as_table(g, 2 * estimate / abs(1 - c0) ** 2)


def cayley_inverse(phi: TruncatedPoly) -> FourierTable:
    """Coefficients of (phi - 1)/(phi + 1)."""
    one = _unit(phi.box)
    g = poly_mul_trunc(phi - one, series_inverse(phi + one), phi.box)
    c0 = phi[(0,) * phi.d]
    estimate = getattr(phi, "trunc_error_estimate", 0.0)
    return _as_table(g, 2 * estimate / abs(1 + c0) ** 2)


def disk_automorphism(f: TruncatedPoly, a: complex) -> FourierTable:
    """Coefficients of (f - a)/(1 - conj(a) f) for |a| < 1."""
    if abs(a) >= 1:
        raise ValueError(f"Automorphism parameter {a} is not inside the unit disk")
    one = _unit(f.box)
    shifted = poly_mul_trunc(f - one * a, series_inverse(one - f * np.conj(a)), f.box)
    estimate = getattr(f, "trunc_error_estimate", 0.0)
    return _as_table(shifted, estimate / (1 - abs(a)))


def torus_grid(grid: Sequence[int], radius: Union[float, Sequence[float]] = 1.0) -> np.ndarray:
    """
    Points r_j * exp(2 pi i k_j / K_j) in C order over the grid.

    :return: (prod K_j, d) complex array, reshapeable to `grid`
    """
    grid = as_multi_index(grid)
    radii = np.broadcast_to(np.asarray(radius, dtype=float), (len(grid),))
    axes = [r * np.exp(2j * np.pi * np.arange(k) / k) for r, k in zip(radii, grid)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def taylor_from_evaluator(
    f: Evaluator,
    box: BoxLike,
    radius: float = TAYLOR_RADIUS,
    grid: Optional[Union[Sequence[int], int]] = None,
) -> FourierTable:
    """
    Recover Taylor coefficients of a function holomorphic on the closed unit polydisk
    by a DFT on the torus of the given radius.

    :param f: evaluator taking (m, d) points
    :param box: coefficients to return
    :param radius: sampling radius, strictly inside the polydisk
    :param grid: samples per axis, defaults to box bound plus TAYLOR_GRID_PAD
    :raises GridTooSmall: when some axis has no more samples than its degree bound
    :return: coefficient table with an aliasing error estimate
    """
    box = enumerate_box(box)
    if not 0 < radius < 1:
        raise ValueError(f"Sampling radius {radius} must be in (0, 1)")
    if grid is None:
        shape = tuple(k + TAYLOR_GRID_PAD for k in box.bound)
    elif isinstance(grid, (int, np.integer)):
        shape = (int(grid),) * box.d
    else:
        shape = as_multi_index(grid)
    if len(shape) != box.d:
        raise ValueError(f"Grid {shape} does not match {box.d} variables")
    if any(k <= n for k, n in zip(shape, box.bound)):
        raise GridTooSmall(f"Grid {shape} cannot resolve box {box.bound}")

    points = torus_grid(shape, radius)
    values = np.asarray(f(points), dtype=complex).reshape(shape)
    spectrum = np.fft.fftn(values) / values.size
    dense = spectrum[tuple(slice(0, k + 1) for k in box.bound)]
    dense = dense * radius ** (-np.sum(np.indices(box.shape), axis=0))

    sup = float(np.max(np.abs(values)))
    estimate = sup * sum(radius**k / (1 - radius**k) for k in shape)
    logger.debug(f"Taylor table on {box.bound} from grid {shape}, alias estimate {estimate:.3e}")
    return FourierTable(box, dense[box.dense_positions], estimate)


def eval_poly(p: TruncatedPoly, z: np.ndarray) -> Any:
    """
    Evaluate by nested Horner, one variable at a time.

    :param z: a single point of shape (d,) or a batch of shape (m, d)
    :return: a complex for a single point, else an (m,) array
    """
    pts = np.asarray(z, dtype=complex)
    single = pts.ndim == 1
    pts = pts.reshape(1, -1) if single else pts
    if pts.ndim != 2 or pts.shape[1] != p.d:
        raise ValueError(f"Expected points with {p.d} coordinates, got shape {np.shape(z)}")
    acc = np.broadcast_to(p.dense(), (pts.shape[0],) + p.box.shape)
    for axis in reversed(range(p.d)):
        x = pts[:, axis].reshape((-1,) + (1,) * axis)
        val = acc[..., -1]
        for k in range(acc.shape[-1] - 2, -1, -1):
            val = val * x + acc[..., k]
        acc = val
    return complex(acc[0]) if single else np.asarray(acc)


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """scale * numerator / denominator, both polynomials in the same variables."""

    numerator: TruncatedPoly
    denominator: TruncatedPoly
    scale: complex = 1.0

    def __post_init__(self) -> None:
        if self.numerator.d != self.denominator.d:
            raise BoxMismatch(
                f"Numerator has {self.numerator.d} variables, denominator {self.denominator.d}"
            )

    @property
    def d(self) -> int:
        return self.numerator.d

    def __call__(self, points: np.ndarray) -> Any:
        return self.scale * eval_poly(self.numerator, points) / eval_poly(self.denominator, points)

    def taylor(self, box: BoxLike) -> TruncatedPoly:
        box = enumerate_box(box)
        return series_divide(self.numerator, self.denominator, box) * self.scale

    def to_json(self) -> dict[str, Any]:
        return {
            "numerator": self.numerator.to_json(),
            "denominator": self.denominator.to_json(),
            "scale": [complex(self.scale).real, complex(self.scale).imag],
        }


@dataclass(frozen=True, eq=False)
class TrigPoly:
    """
    Trigonometric polynomial on the torus, keyed by signed multi-indices.

    Used both for densities rho(zeta) and for elements of the Hankel domain.
    """

    d: int
    coeffs: dict[tuple[int, ...], complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        cleaned: dict[tuple[int, ...], complex] = {}
        for k, v in self.coeffs.items():
            key = tuple(int(a) for a in k)
            if len(key) != self.d:
                raise ValueError(f"Index {key} does not have {self.d} components")
            cleaned[key] = cleaned.get(key, 0j) + complex(v)
        object.__setattr__(self, "coeffs", cleaned)

    @classmethod
    def from_poly(cls, p: TruncatedPoly, shift: Optional[Sequence[int]] = None) -> "TrigPoly":
        """zeta^shift * p(zeta)."""
        offset = np.zeros(p.d, dtype=int) if shift is None else np.asarray(shift, dtype=int)
        return cls(p.d, {tuple(np.add(a, offset)): c for a, c in p.support().items()})

    @property
    def span(self) -> tuple[int, ...]:
        """Largest |k_j| appearing on each axis."""
        if not self.coeffs:
            return (0,) * self.d
        return tuple(max(abs(k[j]) for k in self.coeffs) for j in range(self.d))

    def __getitem__(self, k: Sequence[int]) -> complex:
        return self.coeffs.get(tuple(k), 0j)

    def norm(self) -> float:
        return float(np.sqrt(sum(abs(c) ** 2 for c in self.coeffs.values())))

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c - np.conj(self[tuple(-a for a in k)])) <= tol for k, c in self.coeffs.items())

    def __call__(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=complex))
        out = np.zeros(pts.shape[0], dtype=complex)
        for k, c in self.coeffs.items():
            out += c * np.prod(pts ** np.asarray(k, dtype=float), axis=1)
        return out


@dataclass(frozen=True)
class MomentCheck:
    passed: bool
    violations: tuple[tuple[int, ...], ...]
    max_violation: float


def kp_moment_check(rho: TrigPoly, tol: float = 1e-12) -> MomentCheck:
    """
    Check that a density has no mixed-sign Fourier modes.

    A Caratheodory-class function with Re phi = rho on the torus can only exist when
    every coefficient whose index has both a positive and a negative component vanishes.
    """
    bad = {
        k: abs(c)
        for k, c in rho.coeffs.items()
        if any(a > 0 for a in k) and any(a < 0 for a in k) and abs(c) > tol
    }
    violations = tuple(sorted(bad, key=lambda k: (sum(map(abs, k)), k)))
    return MomentCheck(not bad, violations, max(bad.values(), default=0.0))


def real_part_density(p: TruncatedPoly) -> TrigPoly:
    """Fourier coefficients of 2 Re p on the torus."""
    zero = (0,) * p.d
    out: dict[tuple[int, ...], complex] = {}
    for alpha, c in p.support().items():
        if alpha == zero:
            out[zero] = out.get(zero, 0j) + 2 * c.real
            continue
        out[alpha] = out.get(alpha, 0j) + c
        neg = tuple(-a for a in alpha)
        out[neg] = out.get(neg, 0j) + np.conj(c)
    return TrigPoly(p.d, out)


if __name__ == "__main__":
    logging.basicConfig()
    logger.level = logging.DEBUG
    table = taylor_from_evaluator(lambda pts: 1 / (1 - 0.5 * pts[:, 0] * pts[:, 1]), (3, 3))
    logger.info(f"{table.support(1e-12)}")

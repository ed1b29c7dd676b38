import logging
from typing import Any, Union, Mapping, Optional, Sequence
from functools import lru_cache
from dataclasses import field, dataclass

import numpy as np
import scipy.linalg
import scipy.optimize
from scipy.stats import qmc

from polypade.types import Evaluator
from polypade.approx.pade_driver import ProbeReport, pole_probe
from polypade.series.polyseries import (
    MultiIndex,
    FourierTable,
    TruncatedPoly,
    MultiIndexBox,
    RationalFunction,
    torus_grid,
    enumerate_box,
    as_multi_index,
    cayley_forward,
    disk_automorphism,
    taylor_from_evaluator,
)

logger = logging.getLogger(__name__)

NORMALIZED_TOL = 1e-12
FEAS_FTOL = 1e-9
FEAS_PTOL = 1e-10
FEAS_MAX_ITERS = 20000
PSD_MARGINS = (1e-3, 1e-6, 0.0)
POLISH_MAX_NFEV = 500
POLISH_TOL = 1e-15
RANK_RTOL = 1e-10
UTOL = 1e-8
ETOL = 1e-8
RATIONAL_MAX_SIZE = 12
VTOL = 1e-6
VERIFY_SAMPLES = 1000
VERIFY_RADIUS = 0.999
BOUNDARY_RADII = (0.9, 0.99, 0.999)
BOUNDARY_SAMPLES = 256
EVAL_CHUNK = 4096


class InfeasibleData(ValueError):
    """The data provably admits no Agler certificate."""


class IterationLimit(RuntimeError):
    """The feasibility search ran out of iterations without deciding."""


class RankDefect(RuntimeError):
    """The isometry between the certificate columns could not be formed."""


class U22NotZero(RuntimeError):
    """The corner entry of the unitary colligation did not vanish."""


class SingularResolvent(RuntimeError):
    """I - Delta(z) U was singular at an evaluation point."""


class Unavailable(RuntimeError):
    """The requested conversion is too large to carry out."""


class DegreeBoundViolated(RuntimeError):
    """A recovered polynomial has terms above the degree bound d |Lambda|."""


class OutsidePolydisk(ValueError):
    """An evaluation point is not in the open unit polydisk."""


class CoefficientMismatch(RuntimeError):
    """A constructed interpolant does not reproduce its Taylor data."""


@dataclass(frozen=True, eq=False)
class CFData:
    """Taylor coefficients c_beta of a Caratheodory-class candidate on a box, in box order."""

    box: MultiIndexBox
    c: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.c, dtype=complex).reshape(-1)
        if arr.shape[0] != len(self.box):
            raise ValueError(f"Expected {len(self.box)} coefficients, got {arr.shape[0]}")
        arr.setflags(write=False)
        object.__setattr__(self, "c", arr)

    @classmethod
    def from_table(cls, table: TruncatedPoly) -> "CFData":
        return cls(table.box, table.coeffs)

    @classmethod
    def from_mapping(cls, bound: Sequence[int], mapping: Mapping[Sequence[int], complex]) -> "CFData":
        return cls.from_table(TruncatedPoly.from_mapping(mapping, as_multi_index(bound)))

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def normalized(self) -> bool:
        return abs(self.c[0] - 1) <= NORMALIZED_TOL

    def as_poly(self) -> TruncatedPoly:
        return TruncatedPoly(self.box, self.c)


@dataclass(frozen=True, eq=False)
class StructureMatrices:
    """
    X[beta, gamma] = c_{beta - gamma}, C = column of the data, E = e_0 and
    the shifts T_r with T_r[beta, gamma] = 1 iff beta = gamma + e_r.
    """

    box: MultiIndexBox
    x: np.ndarray
    c_col: np.ndarray
    e_col: np.ndarray
    shifts: tuple[np.ndarray, ...]

    @property
    def rhs(self) -> np.ndarray:
        """2 (E C^* + C E^*), the right side of the Agler identity."""
        ec = np.outer(self.e_col, self.c_col.conj())
        return 2 * (ec + ec.conj().T)


def _shift_matrices(box: MultiIndexBox) -> tuple[np.ndarray, ...]:
    size = len(box)
    out = []
    for r in range(box.d):
        t = np.zeros((size, size))
        for j, gamma in enumerate(box.indices):
            beta = tuple(g + (k == r) for k, g in enumerate(gamma))
            if beta in box:
                t[box.position[beta], j] = 1.0
        out.append(t)
    return tuple(out)


def build_structure(data: CFData) -> StructureMatrices:
    """
    :raises ValueError: when c_0 != 1
    """
    if not data.normalized:
        raise ValueError(f"Interpolation data must have c_0 = 1, got {data.c[0]}")
    box = data.box
    idx = box.index_array
    diff = idx[:, None, :] - idx[None, :, :]
    take = np.all(diff >= 0, axis=-1)
    dense = data.as_poly().dense()
    x = np.zeros((len(box), len(box)), dtype=complex)
    x[take] = dense[tuple(diff[take].T)]
    e = np.zeros(len(box), dtype=complex)
    e[0] = 1.0
    return StructureMatrices(box, x, x[:, 0].copy(), e, _shift_matrices(box))


@dataclass(frozen=True)
class FeasibilityOptions:
    ftol: float = FEAS_FTOL
    ptol: float = FEAS_PTOL
    max_iters: int = FEAS_MAX_ITERS
    margins: tuple[float, ...] = PSD_MARGINS
    polish_max_nfev: int = POLISH_MAX_NFEV


@dataclass(frozen=True, eq=False)
class AglerCertificate:
    """PSD Gamma_1..Gamma_d satisfying 2(E C^* + C E^*) = sum (Gamma_j - T_j Gamma_j T_j^*)."""

    gammas: tuple[np.ndarray, ...]
    eq_residual: float
    min_eig: float
    iterations: int


@dataclass(frozen=True)
class Infeasible:
    reason: str
    conclusive: bool
    residual: float
    iterations: int
    min_eig: float


@lru_cache(maxsize=16)
def _agler_operator(bound: MultiIndex) -> tuple[np.ndarray, np.ndarray]:
    # row-major vec(T G T^*) = kron(T, T) vec(G) for real T
    box = enumerate_box(bound)
    eye = np.eye(len(box) ** 2)
    op = np.hstack([eye - np.kron(t, t) for t in _shift_matrices(box)])
    return op, np.linalg.pinv(op)


def _split(x: np.ndarray, d: int, size: int) -> list[np.ndarray]:
    return [x[j * size * size : (j + 1) * size * size].reshape(size, size) for j in range(d)]


def _hermitian(g: np.ndarray) -> np.ndarray:
    return (g + g.conj().T) / 2


def _project_psd(x: np.ndarray, d: int, size: int, margin: float) -> np.ndarray:
    blocks = []
    for g in _split(x, d, size):
        w, v = np.linalg.eigh(_hermitian(g))
        blocks.append(((v * np.maximum(w, margin)) @ v.conj().T).reshape(-1))
    return np.concatenate(blocks)


def _project_affine(x: np.ndarray, op: np.ndarray, pinv: np.ndarray, b: np.ndarray, d: int, size: int) -> np.ndarray:
    y = x - pinv @ (op @ x - b)
    return np.concatenate([_hermitian(g).reshape(-1) for g in _split(y, d, size)])


def _min_eig(x: np.ndarray, d: int, size: int) -> float:
    return min(float(np.linalg.eigvalsh(_hermitian(g))[0]) for g in _split(x, d, size))


def _gram_jacobian(root: np.ndarray) -> np.ndarray:
    """Derivative of vec(L L^*) (row-major) with respect to (Re L, Im L)."""
    size = root.shape[0]
    eye = np.eye(size)
    left = np.einsum("ak,bl->abkl", eye, root.conj())
    right = np.einsum("al,bk->abkl", root, eye)
    n2 = size * size
    return np.hstack([(left + right).reshape(n2, n2), (1j * (left - right)).reshape(n2, n2)])


def _unpack_roots(theta: np.ndarray, d: int, size: int) -> list[np.ndarray]:
    n2 = size * size
    chunks = theta.reshape(d, 2, n2)
    return [(c[0] + 1j * c[1]).reshape(size, size) for c in chunks]


def _grams(roots: Sequence[np.ndarray]) -> np.ndarray:
    return np.concatenate([(r @ r.conj().T).reshape(-1) for r in roots])


def _factored_polish(
    x: np.ndarray, op: np.ndarray, b: np.ndarray, d: int, size: int, max_nfev: int
) -> tuple[np.ndarray, float]:
    """
    Least squares over Gamma_j = L_j L_j^*, started from the PSD part of x.
    Reaches certificates on the boundary of the cone, where alternating projections stall.
    """
    theta0 = np.concatenate(
        [np.concatenate([r.real.ravel(), r.imag.ravel()]) for r in (_psd_sqrt(g) for g in _split(x, d, size))]
    )
    n2 = size * size

    def residual(theta: np.ndarray) -> np.ndarray:
        r = op @ _grams(_unpack_roots(theta, d, size)) - b
        return np.concatenate([r.real, r.imag])

    def jacobian(theta: np.ndarray) -> np.ndarray:
        roots = _unpack_roots(theta, d, size)
        jac = np.hstack([op[:, j * n2 : (j + 1) * n2] @ _gram_jacobian(r) for j, r in enumerate(roots)])
        return np.vstack([jac.real, jac.imag])

    fit = scipy.optimize.least_squares(
        residual,
        theta0,
        jac=jacobian,
        method="trf",
        ftol=POLISH_TOL,
        xtol=POLISH_TOL,
        gtol=POLISH_TOL,
        max_nfev=max_nfev,
    )
    polished = _grams(_unpack_roots(fit.x, d, size))
    return polished, float(np.linalg.norm(op @ polished - b))


def agler_feasibility(
    data: CFData, options: FeasibilityOptions = FeasibilityOptions()
) -> Union[AglerCertificate, Infeasible]:
    """
    Search for an Agler certificate by Dykstra alternating projections between a
    shifted PSD cone and the affine set of the identity, relaxing the shift in stages.
    When the projections stall, the last iterate seeds a least-squares fit over
    factored Gammas, which certifies data on the boundary of the class.

    :param data: normalized coefficients
    :return: a certificate, or Infeasible (conclusive when X + X^* is not PSD); the
        Infeasible residual is the smallest identity residual reached by a PSD candidate
    """
    s = build_structure(data)
    size, d = len(s.box), s.box.d
    op, pinv = _agler_operator(s.box.bound)
    b = s.rhs.reshape(-1)
    x = pinv @ b
    lam = float(np.linalg.eigvalsh(s.x + s.x.conj().T)[0])
    if lam < -options.ptol:
        logger.info(f"X + X^* has eigenvalue {lam:.3e}, data is not in the Caratheodory class")
        clipped = _project_psd(x, d, size, 0.0)
        residual = float(np.linalg.norm(op @ clipped - b))
        return Infeasible("X + X^* is not positive semidefinite", True, residual, 0, lam)

    scale = max(1.0, float(np.linalg.norm(s.rhs)))
    iterations = 0
    best = -np.inf
    budgets = [options.max_iters // len(options.margins)] * len(options.margins)
    budgets[-1] += options.max_iters - sum(budgets)
    for margin, budget in zip(options.margins, budgets):
        p = np.zeros_like(x)
        q = np.zeros_like(x)
        for _ in range(budget):
            iterations += 1
            y = _project_psd(x + p, d, size, margin * scale)
            p = x + p - y
            x_next = _project_affine(y + q, op, pinv, b, d, size)
            q = y + q - x_next
            x = x_next
            lowest = _min_eig(x, d, size)
            best = max(best, lowest)
            if lowest >= -options.ptol:
                residual = float(np.linalg.norm(op @ x - b))
                if residual <= options.ftol:
                    logger.debug(f"Certificate after {iterations} iterations, min eig {lowest:.3e}")
                    return AglerCertificate(tuple(_split(x, d, size)), residual, lowest, iterations)
        logger.debug(f"Margin {margin:.0e} exhausted after {iterations} iterations, best min eig {best:.3e}")

    polished, residual = _factored_polish(x, op, b, d, size, options.polish_max_nfev)
    lowest = _min_eig(polished, d, size)
    if residual <= options.ftol and lowest >= -options.ptol * scale:
        logger.debug(f"Factored certificate after {iterations} iterations, residual {residual:.3e}")
        return AglerCertificate(tuple(_split(polished, d, size)), residual, lowest, iterations)
    logger.warning(f"Feasibility undecided: best identity residual {residual:.3e} after {iterations} iterations")
    return Infeasible(f"undecided after {iterations} iterations", False, residual, iterations, best)


def require_certificate(result: Union[AglerCertificate, Infeasible]) -> AglerCertificate:
    """
    :raises InfeasibleData: on a conclusive infeasibility
    :raises IterationLimit: when the search was undecided
    """
    if isinstance(result, AglerCertificate):
        return result
    if result.conclusive:
        raise InfeasibleData(result.reason)
    raise IterationLimit(f"{result.reason}, best min eigenvalue {result.min_eig:.3e}")


def isometry_defect(cert: AglerCertificate, data: CFData, h: np.ndarray) -> float:
    """
    |h(0) + (X^* h)(0)|^2 + sum ||Gamma_j^{1/2} T_j^* h||^2
    minus |h(0) - (X^* h)(0)|^2 + sum ||Gamma_j^{1/2} h||^2; zero for a valid certificate.
    """
    s = build_structure(data)
    h = np.asarray(h, dtype=complex)
    at_zero = np.vdot(s.c_col, h)
    lhs = abs(h[0] + at_zero) ** 2
    rhs = abs(h[0] - at_zero) ** 2
    for g, t in zip(cert.gammas, s.shifts):
        th = t.T @ h
        lhs += np.vdot(th, g @ th).real
        rhs += np.vdot(h, g @ h).real
    return float(lhs - rhs)


@dataclass(frozen=True, eq=False)
class Realization:
    """
    Transfer function realization phi(z) = 1 + 2 V^* U (I - Delta(z) U)^{-1} Delta(z) V,
    with Delta(z) = diag(z_1 I, ..., z_d I) on blocks of the box size.
    """

    box: MultiIndexBox
    u: np.ndarray
    v: np.ndarray
    u22: float
    colligation: np.ndarray = field(repr=False)

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def state_dim(self) -> int:
        return self.u.shape[0]

    @property
    def unitarity_defect(self) -> float:
        w = self.colligation
        return float(np.linalg.norm(w.conj().T @ w - np.eye(w.shape[0])))

    def __call__(self, points: np.ndarray) -> Any:
        return eval_realization(self, points)


def _psd_sqrt(g: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(_hermitian(g))
    return (v * np.sqrt(np.maximum(w, 0.0))) @ v.conj().T


def _rank(sv: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if sv.size == 0 or sv[0] == 0:
        return 0
    return int(np.count_nonzero(sv > rtol * sv[0]))


def build_realization(cert: AglerCertificate, data: CFData, utol: float = UTOL) -> Realization:
    """
    Lurking-isometry construction: a unitary W with W A = B where A^* A = B^* B,
    then U = U11 - U12 U21 and V = -U12 once the corner U22 is checked to vanish.
    Rank and corner tolerances widen to the square root of the certificate residual,
    the accuracy of Gram factors from a boundary certificate.

    :raises RankDefect: if A has rank 0 or A and B have different ranks
    :raises U22NotZero: if |U22| exceeds utol (or the widened tolerance)
    """
    slack = float(np.sqrt(max(cert.eq_residual, 0.0)))
    rtol = max(RANK_RTOL, slack)
    utol = max(utol, slack)
    s = build_structure(data)
    roots = [_psd_sqrt(g) for g in cert.gammas]
    row_a = (s.e_col - s.c_col).conj()[None, :]
    row_b = (s.e_col + s.c_col).conj()[None, :]
    a = np.vstack(roots + [row_a])
    b = np.vstack([r @ t.T for r, t in zip(roots, s.shifts)] + [row_b])

    p_full, sv, qh = np.linalg.svd(a)
    rank = _rank(sv, rtol)
    rank_b = _rank(np.linalg.svd(b, compute_uv=False), rtol)
    if rank == 0 or rank != rank_b:
        raise RankDefect(f"rank(A) = {rank}, rank(B) = {rank_b}")
    p_r = p_full[:, :rank]
    w_r = b @ qh[:rank].conj().T / sv[:rank]
    drift = float(np.linalg.norm(w_r.conj().T @ w_r - np.eye(rank)))
    logger.debug(f"Isometry drift before polar step: {drift:.3e}")
    y, _, zh = np.linalg.svd(w_r, full_matrices=False)
    w_r = y @ zh

    p_all = np.hstack([p_r, scipy.linalg.null_space(p_r.conj().T)])
    w_all = np.hstack([w_r, scipy.linalg.null_space(w_r.conj().T)])
    colligation = w_all @ p_all.conj().T

    dim = len(roots) * len(s.box)
    u22 = abs(colligation[dim, dim])
    if u22 > utol:
        raise U22NotZero(f"|U22| = {u22:.3e} exceeds {utol:.1e}")
    u12 = colligation[:dim, dim]
    u21 = colligation[dim, :dim]
    u = colligation[:dim, :dim] - np.outer(u12, u21)
    return Realization(s.box, u, -u12, float(u22), colligation)


def _points(z: np.ndarray, d: int) -> tuple[np.ndarray, bool]:
    pts = np.asarray(z, dtype=complex)
    single = pts.ndim == 1
    pts = pts.reshape(1, -1) if single else pts
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"Expected points with {d} coordinates, got shape {np.shape(z)}")
    return pts, single


def _delta(pts: np.ndarray, size: int) -> np.ndarray:
    return np.repeat(pts, size, axis=1)


def eval_realization(r: Realization, z: np.ndarray, etol: float = ETOL) -> Any:
    """
    :param z: one point (d,) or a batch (m, d) in the open polydisk
    :raises OutsidePolydisk: for a point with some |z_j| >= 1
    :raises SingularResolvent: if I - Delta(z) U is singular
    """
    pts, single = _points(z, r.d)
    if pts.size and np.max(np.abs(pts)) >= 1:
        raise OutsidePolydisk("Realization is only evaluated inside the open unit polydisk")
    dim = r.state_dim
    size = len(r.box)
    w = r.v.conj() @ r.u
    out = np.empty(pts.shape[0], dtype=complex)
    for start in range(0, pts.shape[0], EVAL_CHUNK):
        delta = _delta(pts[start : start + EVAL_CHUNK], size)
        lhs = np.eye(dim)[None] - delta[:, :, None] * r.u[None]
        rhs = (delta * r.v[None])[..., None]
        try:
            x = np.linalg.solve(lhs, rhs)[..., 0]
        except np.linalg.LinAlgError as e:
            raise SingularResolvent(f"Singular resolvent near {pts[start]}") from e
        out[start : start + EVAL_CHUNK] = 1 + 2 * (x @ w)
    low = float(out.real.min()) if out.size else 0.0
    if low < -etol:
        logger.warning(f"Re phi = {low:.3e} below -{etol:.0e} at an interior point")
    return complex(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class RealizationRational:
    rational: RationalFunction
    degree: MultiIndex
    probe: ProbeReport


def _det_grid(k: np.ndarray, pts: np.ndarray, size: int) -> np.ndarray:
    delta = _delta(pts, size)
    return np.linalg.det(np.eye(k.shape[0])[None] - delta[:, :, None] * k[None])


def realization_to_rational(r: Realization, max_size: int = RATIONAL_MAX_SIZE) -> RealizationRational:
    """
    phi = P / Q with Q = det(I - Delta U) and P = 2 Q - det(I - Delta (U + 2 V V^* U)),
    recovered by a DFT on the unit torus.

    :raises Unavailable: when the state dimension exceeds max_size
    :raises DegreeBoundViolated: if either polynomial has terms above d |Lambda| in some variable
    """
    dim = r.state_dim
    if dim > max_size:
        raise Unavailable(f"State dimension {dim} exceeds {max_size}")
    shape = (dim + 2,) * r.d
    pts = torus_grid(shape, 1.0)
    size = len(r.box)
    den_vals = _det_grid(r.u, pts, size)
    alt_vals = _det_grid(r.u + 2 * np.outer(r.v, r.v.conj() @ r.u), pts, size)
    polys = []
    for vals in (2 * den_vals - alt_vals, den_vals):
        dense = np.fft.fftn(vals.reshape(shape)) / vals.size
        scale = max(float(np.max(np.abs(dense))), 1.0)
        inside = tuple(slice(0, dim + 1) for _ in range(r.d))
        spill = dense.copy()
        spill[inside] = 0
        if np.max(np.abs(spill)) > 1e-9 * scale:
            raise DegreeBoundViolated(f"Coefficient {np.max(np.abs(spill)):.3e} above degree {dim}")
        polys.append(TruncatedPoly.from_dense(dense[inside]))
    num, den = polys
    support = np.array(list(num.support(1e-10)) + list(den.support(1e-10)) or [(0,) * r.d])
    degree = tuple(int(k) for k in support.max(axis=0))
    rational = RationalFunction(num.restrict(degree), den.restrict(degree))
    probe = pole_probe(rational.denominator, radii=(0.5, 0.9, 0.99))
    if not probe.interior_zero_free:
        logger.warning("Recovered denominator nearly vanishes inside the polydisk")
    return RealizationRational(rational, degree, probe)


@dataclass(frozen=True)
class VerifyOptions:
    vtol: float = VTOL
    samples: int = VERIFY_SAMPLES
    seed: int = 0
    sample_radius: float = VERIFY_RADIUS
    boundary_radii: tuple[float, ...] = BOUNDARY_RADII
    boundary_samples: int = BOUNDARY_SAMPLES


@dataclass(frozen=True)
class InterpolantReport:
    max_coeff_err: float
    min_re: float
    boundary_profile: dict[float, float]
    coeff_ok: bool
    positive_ok: bool
    decreasing: bool


def _halton_polydisk(d: int, samples: int, radius: float, seed: int) -> np.ndarray:
    u = qmc.Halton(d=2 * d, scramble=True, seed=seed).random(samples)
    return radius * np.sqrt(u[:, :d]) * np.exp(2j * np.pi * u[:, d:])


def verify_interpolant(r: Realization, data: CFData, options: VerifyOptions = VerifyOptions()) -> InterpolantReport:
    """
    Check a realization against its data: Taylor coefficients on the box, Re phi >= 0
    on quasi-random interior samples, and the median of Re phi near the boundary.
    """
    table = taylor_from_evaluator(lambda pts: eval_realization(r, pts), data.box)
    err = float(np.max(np.abs(table.coeffs - data.c)))
    interior = _halton_polydisk(r.d, options.samples, options.sample_radius, options.seed)
    min_re = float(np.min(eval_realization(r, interior).real))
    angles = qmc.Halton(d=r.d, scramble=True, seed=options.seed + 1).random(options.boundary_samples)
    zeta = np.exp(2j * np.pi * angles)
    profile = {float(rad): float(np.median(eval_realization(r, rad * zeta).real)) for rad in options.boundary_radii}
    values = list(profile.values())
    decreasing = all(a > b for a, b in zip(values, values[1:]))
    logger.debug(f"coefficient error {err:.3e}, min Re phi {min_re:.3e}, boundary {profile}")
    return InterpolantReport(err, min_re, profile, err <= options.vtol, min_re >= -ETOL, decreasing)


def cayley_factor_check(r: Realization, z: np.ndarray) -> float:
    """Smallest eigenvalue of I - U Delta(z) Delta(z)^* U^*, non-negative inside the polydisk."""
    pts, _ = _points(z, r.d)
    delta = _delta(pts[:1], len(r.box))[0]
    ud = r.u * delta[None, :]
    return float(np.linalg.eigvalsh(np.eye(r.state_dim) - ud @ ud.conj().T)[0])


@dataclass(frozen=True, eq=False)
class CFApproximant:
    """
    Rational inner f_n = m_a^{-1}((phi - 1)/(phi + 1)) where phi is the realization
    interpolating the Cayley transform of the shifted table and m_a(x) = (x - a)/(1 - conj(a) x).
    """

    n: int
    shift: complex
    realization: Realization
    table: FourierTable
    certificate: AglerCertificate
    coeff_error: float = 0.0
    rational: Optional[RealizationRational] = None

    def __call__(self, points: np.ndarray) -> np.ndarray:
        phi = np.atleast_1d(eval_realization(self.realization, points))
        h = (phi - 1) / (phi + 1)
        return (h + self.shift) / (1 + np.conj(self.shift) * h)

    @property
    def degree_bound(self) -> int:
        return self.realization.state_dim


def cf_inner_sequence(
    f: Evaluator,
    d: int,
    n: int,
    feasibility: FeasibilityOptions = FeasibilityOptions(),
    vtol: float = VTOL,
    max_size: int = RATIONAL_MAX_SIZE,
) -> CFApproximant:
    """
    Rational inner function whose Taylor coefficients agree with f through (n, ..., n).

    The rational form of the Cayley interpolant is recovered only while the state
    dimension is at most max_size; above that ``rational`` is None and the approximant
    is evaluated through its realization.

    :param f: Schur-class evaluator, not a unimodular constant
    :raises InfeasibleData: if the Cayley data is not certifiable
    :raises IterationLimit: if the feasibility search is undecided
    :raises CoefficientMismatch: if the approximant or its rational form misses the Taylor data by more than vtol
    :raises DegreeBoundViolated: if the rational form has degree above the state dimension
    """
    box = enumerate_box((n,) * d)
    table = taylor_from_evaluator(f, box)
    a = table[(0,) * d]
    if abs(a) >= 1 - NORMALIZED_TOL:
        raise ValueError(f"f(0) = {a} is not inside the unit disk")
    g = cayley_forward(disk_automorphism(table, a))
    data = CFData.from_table(g)
    cert = require_certificate(agler_feasibility(data, feasibility))
    realization = build_realization(cert, data)
    rational = None
    if realization.state_dim <= max_size:
        rational = realization_to_rational(realization, max_size)
        if max(rational.degree) > realization.state_dim:
            raise DegreeBoundViolated(f"Degree {rational.degree} above state dimension {realization.state_dim}")
        rat_err = float(np.max(np.abs(rational.rational.taylor(box).coeffs - data.c)))
        if rat_err > vtol:
            raise CoefficientMismatch(f"n = {n}: rational form misses the Cayley data by {rat_err:.3e}")
    else:
        logger.info(f"n = {n}: state dimension {realization.state_dim} above {max_size}, no rational form")
    approx = CFApproximant(n, complex(a), realization, table, cert, rational=rational)
    recovered = taylor_from_evaluator(approx, box)
    err = float(np.max(np.abs(recovered.coeffs - table.coeffs)))
    if err > vtol:
        raise CoefficientMismatch(f"n = {n}: coefficient mismatch {err:.3e} exceeds {vtol:.0e}")
    return CFApproximant(n, complex(a), realization, table, cert, err, rational)


if __name__ == "__main__":
    logging.basicConfig()
    logger.level = logging.DEBUG
    sample = CFData.from_mapping((1, 1), {(0, 0): 1.0, (1, 0): 0.5, (0, 1): 0.5})
    certificate = require_certificate(agler_feasibility(sample))
    model = build_realization(certificate, sample)
    logger.info(f"{verify_interpolant(model, sample)}")

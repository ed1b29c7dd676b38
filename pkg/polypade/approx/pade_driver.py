import math
import logging
from typing import Any, Callable, Optional, Sequence
from dataclasses import field, dataclass

import numpy as np
import scipy.optimize

from polypade.types import Evaluator
from polypade.approx.takagi_engine import (
    ConEigPair,
    ConEigOptions,
    con_eig_max,
    build_con_matrix,
)
from polypade.series.polyseries import (
    MultiIndex,
    BoxMismatch,
    FourierTable,
    TruncatedPoly,
    MultiIndexBox,
    RationalFunction,
    reflect,
    eval_poly,
    torus_grid,
    poly_mul_trunc,
    enumerate_box,
    series_divide,
    as_multi_index,
    taylor_from_evaluator,
)

logger = logging.getLogger(__name__)

SUP_GRID_POINTS = 256
SUP_RADIUS = 0.999
PROBE_RADII = (0.5, 0.9, 0.99, 1.0)
PROBE_GRID_LOW_DIM = 128
PROBE_GRID_HIGH_DIM = 32
ZERO_TOL = 1e-6
MATCH_TOL = 1e-7
QSTAR0_TOL = 1e-8
QUAD_PAD = 8
PLATEAU_GRID = 64
STUDY_COMPACTS = (0.5, 0.8)
STUDY_GRID = 64
STUDY_MASK_TOL = 1e-3
MAX_NEAR_ZEROS = 64
POLISH_STARTS = 16
POLISH_GTOL = 1e-14
ZERO_MERGE_TOL = 1e-6
PFISTER_DEN_TOL = 1e-6


@dataclass(frozen=True)
class PadeOptions:
    sup_radius: float = SUP_RADIUS
    sup_points: int = SUP_GRID_POINTS
    probe_radii: tuple[float, ...] = PROBE_RADII
    probe_grid: Optional[int] = None
    ztol: float = ZERO_TOL
    mtol: float = MATCH_TOL
    qstar0_tol: float = QSTAR0_TOL
    con_eig: ConEigOptions = field(default_factory=ConEigOptions)


@dataclass(frozen=True, eq=False)
class ProbeReport:
    """
    Minimum of |q*| on tori of increasing radius, with the points where it nearly vanishes
    (modulus below ztol |q*|, after polishing the grid minima).
    """

    min_modulus: dict[float, float]
    near_zeros: dict[float, np.ndarray]
    grid: int

    @property
    def interior_min(self) -> float:
        inner = [m for r, m in self.min_modulus.items() if r < 1]
        return min(inner, default=math.inf)

    @property
    def interior_zero_free(self) -> bool:
        return all(len(z) == 0 for r, z in self.near_zeros.items() if r < 1)


@dataclass(frozen=True, eq=False)
class PadeReport:
    n: MultiIndex
    sigma: float
    q: TruncatedPoly
    q_star: TruncatedPoly
    remainder_l2: float
    bound_l2: float
    sup_gap_bound_l2: float
    sup_estimate: float
    probe: ProbeReport
    taylor_match_depth: Optional[MultiIndex]
    multiplicity: int = 1
    con_residual: float = 0.0
    table_truncated: bool = False

    @property
    def sup_gap_bound_holds(self) -> bool:
        return self.remainder_l2 <= self.sup_gap_bound_l2 + MATCH_TOL

    @property
    def rational(self) -> RationalFunction:
        """The approximant sigma q / q* with any common monomial factor removed."""
        num, den = strip_common_monomial(self.q, self.q_star)
        return RationalFunction(num, den, self.sigma)


def _axis_grid(d: int, total: int) -> int:
    # `total` points overall for d <= 2, per-axis count held for larger d
    return max(8, int(round(total ** (min(d, 2) / d))))


def estimate_sup_norm(
    f: Evaluator, d: int, radius: float = SUP_RADIUS, points: int = SUP_GRID_POINTS
) -> float:
    """Largest |f| over a torus grid just inside the closed polydisk."""
    pts = torus_grid((_axis_grid(d, points),) * d, radius)
    return float(np.max(np.abs(f(pts))))


def l2_remainder_bound(sup_f: float, sigma: float, q_norm: float = 1.0) -> float:
    """||f q* - sigma q||_2 <= sqrt(||f||^2 - sigma^2) ||q|| on the torus."""
    return math.sqrt(max(sup_f**2 - sigma**2, 0.0)) * q_norm


def remainder_pointwise_bound(sup_f: float, sigma: float, q_norm: float, delta: float, m: int, d: int) -> float:
    """(||f|| - sigma) ||q|| delta^m / (1 - delta^2)^(d/2), for |z_j| <= delta."""
    if not 0 < delta < 1:
        raise ValueError(f"delta = {delta} must be in (0, 1)")
    return (sup_f - sigma) * q_norm * delta**m / (1 - delta**2) ** (d / 2)


def tail_factor(moduli: Any, n: Sequence[int]) -> Any:
    """
    Norm of the point evaluation at z restricted to monomials outside the box of n.

    :param moduli: |z_j| values broadcastable to (..., d), each < 1
    """
    n = np.asarray(as_multi_index(n))
    r = np.asarray(moduli, dtype=float)
    r2 = np.broadcast_to(r, np.broadcast_shapes(r.shape, n.shape)) ** 2
    if np.any(r2 >= 1):
        raise ValueError("Tail factor needs every |z_j| < 1")
    full = np.prod(1 / (1 - r2), axis=-1)
    head = np.prod((1 - r2 ** (n + 1)) / (1 - r2), axis=-1)
    return np.sqrt(np.maximum(full - head, 0.0))


def strip_common_monomial(q: TruncatedPoly, q_star: TruncatedPoly, tol: float = 1e-14) -> tuple[TruncatedPoly, TruncatedPoly]:
    """Divide q and q* by the largest monomial dividing both."""
    scale = max(np.max(np.abs(q.coeffs)), np.max(np.abs(q_star.coeffs)), tol)
    lows = []
    for p in (q, q_star):
        supp = np.array(list(p.support(tol * scale)) or [p.bound])
        lows.append(supp.min(axis=0))
    gamma = np.minimum(*lows)
    if not gamma.any():
        return q, q_star
    out = []
    for p in (q, q_star):
        dense = p.dense()[tuple(slice(int(g), None) for g in gamma)]
        out.append(TruncatedPoly.from_dense(dense))
    return out[0], out[1]


def _partials(p: TruncatedPoly) -> list[Optional[TruncatedPoly]]:
    dense = p.dense()
    out: list[Optional[TruncatedPoly]] = []
    for axis in range(p.d):
        if dense.shape[axis] == 1:
            out.append(None)
            continue
        k = np.arange(dense.shape[axis]).reshape([-1 if j == axis else 1 for j in range(p.d)])
        out.append(TruncatedPoly.from_dense(np.take(dense * k, range(1, dense.shape[axis]), axis=axis)))
    return out


def _grid_minima(mod: np.ndarray, grid: int, d: int) -> np.ndarray:
    """Flat indices of periodic local minima of a sampled modulus, smallest first."""
    shaped = mod.reshape((grid,) * d)
    local = np.ones(shaped.shape, dtype=bool)
    for axis in range(d):
        for step in (1, -1):
            local &= shaped <= np.roll(shaped, step, axis=axis)
    flat = np.flatnonzero(local.ravel())
    return flat[np.argsort(mod[flat], kind="stable")][:POLISH_STARTS]


def _polish_zero(
    q_star: TruncatedPoly, partials: Sequence[Optional[TruncatedPoly]], radius: float, angles: np.ndarray
) -> tuple[np.ndarray, float]:
    """Minimize |q*|^2 over the angles of the torus of the given radius."""

    def objective(theta: np.ndarray) -> tuple[float, np.ndarray]:
        z = radius * np.exp(1j * theta)
        value = eval_poly(q_star, z)
        grad = np.zeros(theta.shape[0])
        for j, dq in enumerate(partials):
            if dq is not None:
                grad[j] = 2 * np.real(np.conj(value) * eval_poly(dq, z) * 1j * z[j])
        return abs(value) ** 2, grad

    fit = scipy.optimize.minimize(objective, angles, jac=True, method="BFGS", options={"gtol": POLISH_GTOL})
    z = radius * np.exp(1j * fit.x)
    return z, abs(eval_poly(q_star, z))


def pole_probe(
    q_star: TruncatedPoly,
    radii: Sequence[float] = PROBE_RADII,
    grid: Optional[int] = None,
    ztol: float = ZERO_TOL,
) -> ProbeReport:
    """
    Sample |q*| on tori of increasing radius, then polish the smallest grid-local minima
    on each torus by a local minimization over the angles.

    :param radii: strictly increasing radii in (0, 1]
    :param grid: samples per axis, 128 for d <= 2 and 32 otherwise
    :param ztol: a polished point is a near zero when |q*| < ztol |q*|_2
    """
    radii = tuple(float(r) for r in radii)
    if not radii or any(not 0 < r <= 1 for r in radii) or any(a >= b for a, b in zip(radii, radii[1:])):
        raise ValueError(f"Probe radii {radii} must be strictly increasing in (0, 1]")
    if grid is None:
        grid = PROBE_GRID_LOW_DIM if q_star.d <= 2 else PROBE_GRID_HIGH_DIM
    # polish the unit-norm multiple, so ztol is relative to |q*|_2
    norm = q_star.norm() or 1.0
    unit = q_star * (1 / norm)
    partials = _partials(unit)
    minima: dict[float, float] = {}
    zeros: dict[float, np.ndarray] = {}
    for r in radii:
        pts = torus_grid((grid,) * q_star.d, r)
        mod = np.abs(eval_poly(unit, pts))
        lowest = float(mod.min())
        found: list[np.ndarray] = []
        for k in _grid_minima(mod, grid, q_star.d):
            z, value = _polish_zero(unit, partials, r, np.angle(pts[k]))
            lowest = min(lowest, value)
            if value < ztol and all(np.max(np.abs(z - y)) > ZERO_MERGE_TOL for y in found):
                found.append(z)
        minima[r] = lowest * norm
        zeros[r] = np.array(found[:MAX_NEAR_ZEROS], dtype=complex).reshape(-1, q_star.d)
        logger.debug(f"min |q*| on radius {r}: {minima[r]:.3e}, {len(found)} near zeros")
    return ProbeReport(minima, zeros, grid)


def taylor_match_depth(
    table: TruncatedPoly,
    q: TruncatedPoly,
    q_star: TruncatedPoly,
    sigma: float,
    mtol: float = MATCH_TOL,
    qstar0_tol: float = QSTAR0_TOL,
) -> Optional[MultiIndex]:
    """
    Largest box n + t(1, ..., 1), clipped to the table, on which the Taylor
    coefficients of sigma q / q* agree with the table.

    :return: the box bound, or None when q*(0) is too small to expand around
    """
    num, den = strip_common_monomial(q, q_star)
    if abs(den[(0,) * den.d]) < qstar0_tol:
        return None
    n = np.asarray(q.bound)
    top = np.asarray(table.bound)
    candidates: list[MultiIndex] = []
    for t in range(-int(n.max()), int((top - n).max()) + 1):
        m = tuple(int(k) for k in np.clip(n + t, 0, top))
        if not candidates or m != candidates[-1]:
            candidates.append(m)
    best: Optional[MultiIndex] = None
    for m in candidates:
        approx = series_divide(num, den, m) * sigma
        if np.max(np.abs(approx.coeffs - table.restrict(m).coeffs)) > mtol:
            break
        best = m
    return best


def _remainder_l2(f: Evaluator, q: TruncatedPoly, q_star: TruncatedPoly, sigma: float, table: TruncatedPoly) -> float:
    # exact for symbols whose degree is within the table bound
    grid = tuple(max(4 * n + QUAD_PAD, 2 * (t + n) + 1) for n, t in zip(q.bound, table.bound))
    pts = torus_grid(grid, 1.0)
    resid = f(pts) * eval_poly(q_star, pts) - sigma * eval_poly(q, pts)
    return float(np.sqrt(np.mean(np.abs(resid) ** 2)))


def _report(
    table: TruncatedPoly,
    f: Evaluator,
    box: MultiIndexBox,
    pair: ConEigPair,
    options: PadeOptions,
    truncated: bool = False,
) -> PadeReport:
    q = pair.q
    q_star = reflect(q, box.bound)
    sup = estimate_sup_norm(f, box.d, options.sup_radius, options.sup_points)
    if pair.sigma > sup + options.mtol:
        logger.warning(f"sigma {pair.sigma:.6g} above sampled sup {sup:.6g}, using sigma as the sup")
    sup = max(sup, pair.sigma)
    remainder = _remainder_l2(f, q, q_star, pair.sigma, table)
    report = PadeReport(
        n=box.bound,
        sigma=pair.sigma,
        q=q,
        q_star=q_star,
        remainder_l2=remainder,
        bound_l2=l2_remainder_bound(sup, pair.sigma, q.norm()),
        sup_gap_bound_l2=(sup - pair.sigma) * q.norm(),
        sup_estimate=sup,
        probe=pole_probe(q_star, options.probe_radii, options.probe_grid, options.ztol),
        taylor_match_depth=taylor_match_depth(table, q, q_star, pair.sigma, options.mtol, options.qstar0_tol),
        multiplicity=pair.multiplicity,
        con_residual=pair.residual,
        table_truncated=truncated,
    )
    if not report.sup_gap_bound_holds:
        logger.info(
            f"n = {box.bound}: remainder {remainder:.4g} exceeds (sup - sigma)|q| = {report.sup_gap_bound_l2:.4g}"
        )
    return report


def pade_step(
    table: TruncatedPoly,
    f: Evaluator,
    n: Sequence[int],
    options: PadeOptions = PadeOptions(),
) -> PadeReport:
    """
    One con-eigenvalue Pade step at multi-degree n.

    :param table: Taylor coefficients of f, covering at least the box of n
    :param f: evaluator of the symbol on the closed polydisk
    :param n: multi-degree
    :return: sigma, q, q*, remainder norms, pole probe and Taylor match depth
    """
    box = enumerate_box(as_multi_index(n))
    if table.d != box.d:
        raise BoxMismatch(f"Table has {table.d} variables but n = {box.bound}")
    a = build_con_matrix(table, box.bound)
    pair = con_eig_max(a, options.con_eig)
    return _report(table, f, box, pair, options, a.truncated)


def detect_rational_inner(report: PadeReport, tol: float = 1e-8) -> bool:
    """
    True when sigma reaches the sup norm 1 with a vanishing remainder,
    i.e. f = sigma q / q* is rational inner.
    """
    hit = report.sigma >= 1 - tol and report.sup_estimate <= 1 + tol and report.remainder_l2 <= tol
    if hit and not report.probe.interior_zero_free:
        logger.warning(f"n = {report.n}: sigma = 1 but q* nearly vanishes inside the polydisk")
        return False
    return hit


@dataclass(frozen=True, eq=False)
class TensorPadeResult:
    report: PadeReport
    sigma_g: float
    sigma_h: float
    sigma_direct: float
    q_g: TruncatedPoly
    q_h: TruncatedPoly


def tensor_pade(
    g: TruncatedPoly,
    h: TruncatedPoly,
    n1: int,
    n2: int,
    g_eval: Optional[Evaluator] = None,
    h_eval: Optional[Evaluator] = None,
    options: PadeOptions = PadeOptions(),
) -> TensorPadeResult:
    """
    Pade step for f(z, w) = g(z) h(w) built from the two one-variable steps.

    The product of the one-variable con-eigenpairs is a con-eigenpair of the
    two-variable matrix, which is checked against a direct solve.
    """
    if g.d != 1 or h.d != 1:
        raise BoxMismatch("tensor_pade takes two single-variable symbols")
    pg = con_eig_max(build_con_matrix(g, (n1,)), options.con_eig)
    ph = con_eig_max(build_con_matrix(h, (n2,)), options.con_eig)
    box = enumerate_box((n1, n2))
    table = TruncatedPoly.from_dense(np.outer(g.dense(), h.dense()))

    def product(points: np.ndarray) -> np.ndarray:
        left = (g_eval or g)(points[:, :1])
        right = (h_eval or h)(points[:, 1:])
        return np.asarray(left) * np.asarray(right)

    a = build_con_matrix(table, box.bound)
    q = TruncatedPoly.from_dense(np.outer(pg.q.dense(), ph.q.dense()), box)
    sigma = pg.sigma * ph.sigma
    residual = float(np.linalg.norm(a.entries @ np.conj(q.coeffs) - sigma * q.coeffs))
    direct = con_eig_max(a, options.con_eig)
    if abs(direct.sigma - sigma) > 1e-10 * max(1.0, direct.sigma):
        logger.warning(f"Tensor sigma {sigma:.12g} differs from direct solve {direct.sigma:.12g}")
    pair = ConEigPair(sigma, q, residual, direct.multiplicity)
    return TensorPadeResult(
        _report(table, product, box, pair, options, a.truncated),
        pg.sigma,
        ph.sigma,
        direct.sigma,
        pg.q,
        ph.q,
    )


@dataclass(frozen=True, eq=False)
class PfisterApproximant:
    """
    phi = (p + m z^N) / (1 + m p*) with m = (z_1...z_d)^s, unimodular on the torus,
    whose Taylor polynomial of total degree kappa is p.
    """

    kappa: int
    p: TruncatedPoly
    phi: RationalFunction
    taylor_error: float
    unimodular_error: float
    sup_error: float


def _total_degree_truncation(table: TruncatedPoly, kappa: int) -> TruncatedPoly:
    keep = np.asarray([sum(a) <= kappa for a in table.box.indices])
    return TruncatedPoly(table.box, np.where(keep, table.coeffs, 0))


def _pfister_shift(p: TruncatedPoly, kappa: int) -> int:
    """
    Smallest s >= 1 such that (z_1...z_d)^s p* p has no terms of total degree <= kappa,
    which keeps the Taylor polynomial of phi equal to p.
    """
    degrees = [sum(a) for a in p.support(1e-12 * max(np.max(np.abs(p.coeffs)), 1e-300))]
    if not degrees:
        return 1
    low_reflected = p.d * kappa - max(degrees)
    return max(1, math.ceil((kappa + 1 - low_reflected - min(degrees)) / p.d))


def _check_grid(d: int) -> int:
    return 64 if d <= 2 else 16


def pfister_sequence(
    f: Evaluator, d: int, rho: float, kappas: Sequence[int], radius: float = 0.5
) -> list[PfisterApproximant]:
    """
    Rational inner functions approximating f(rho z) on the torus of the given radius,
    one per total degree kappa.
    """
    if not 0 < rho < 1:
        raise ValueError(f"rho = {rho} must be in (0, 1)")

    def scaled(points: np.ndarray) -> np.ndarray:
        return f(rho * points)

    out = []
    check_pts = torus_grid((_check_grid(d),) * d, radius)
    torus_pts = torus_grid((_check_grid(d),) * d, 1.0)
    target = np.asarray(scaled(check_pts))
    for kappa in kappas:
        if kappa < 0:
            raise ValueError(f"kappa = {kappa} must be non-negative")
        big_n = (int(kappa),) * d
        table = taylor_from_evaluator(scaled, big_n)
        p = _total_degree_truncation(table, kappa)
        s = _pfister_shift(p, kappa)
        out_box = tuple(k + s for k in big_n)
        shift = TruncatedPoly.monomial(out_box, (s,) * d)
        numerator = p.restrict(out_box) + TruncatedPoly.monomial(out_box, out_box)
        denominator = TruncatedPoly.monomial(out_box, (0,) * d) + poly_mul_trunc(
            shift, reflect(p, big_n).restrict(out_box), out_box
        )
        phi = RationalFunction(numerator, denominator)
        expansion = _total_degree_truncation(phi.taylor(big_n), kappa)
        den = np.abs(eval_poly(phi.denominator, torus_pts))
        on_torus = torus_pts[den > PFISTER_DEN_TOL]
        boundary = np.abs(phi(on_torus))
        approx = PfisterApproximant(
            kappa=int(kappa),
            p=p,
            phi=phi,
            taylor_error=float(np.max(np.abs(expansion.coeffs - p.coeffs))),
            unimodular_error=float(np.max(np.abs(boundary - 1), initial=0.0)),
            sup_error=float(np.max(np.abs(phi(check_pts) - target))),
        )
        logger.debug(f"kappa = {kappa}: sup error {approx.sup_error:.3e}")
        out.append(approx)
    return out


@dataclass(frozen=True, eq=False)
class PlateauHistogram:
    weights: np.ndarray
    magnitudes: np.ndarray
    sup_estimate: float
    concentration_ratio: float


def plateau_histogram(
    q: TruncatedPoly,
    f: Evaluator,
    grid: int = PLATEAU_GRID,
    eps: float = 0.05,
    sup: Optional[float] = None,
) -> PlateauHistogram:
    """
    Spread of the measure |q|^2 dm over the torus, and the share of it sitting where
    |f| is within eps of its sup.
    """
    if abs(q.norm() - 1) > 1e-8:
        raise ValueError(f"q must have unit norm, got {q.norm():.12g}")
    pts = torus_grid((grid,) * q.d, 1.0)
    weights = np.abs(eval_poly(q, pts)) ** 2 / pts.shape[0]
    mags = np.abs(f(pts))
    top = float(mags.max()) if sup is None else float(sup)
    total = float(weights.sum())
    ratio = float(weights[mags >= top - eps].sum() / total) if total > 0 else 0.0
    return PlateauHistogram(weights, mags, top, ratio)


def approximation_error(report: PadeReport, f: Evaluator, radius: float) -> tuple[float, int]:
    """
    Largest |sigma q / q* - f| on the torus of the given radius, skipping grid points
    where |q*| < STUDY_MASK_TOL.

    :return: the error and the number of skipped points
    """
    approx = report.rational
    d = approx.d
    pts = torus_grid((STUDY_GRID if d <= 2 else 16,) * d, radius)
    keep = np.abs(eval_poly(approx.denominator, pts)) >= STUDY_MASK_TOL
    diff = np.abs(approx(pts[keep]) - f(pts[keep])) if keep.any() else np.zeros(0)
    return float(diff.max(initial=0.0)), int(np.count_nonzero(~keep))


@dataclass(frozen=True)
class ConvergenceRow:
    n: MultiIndex
    sigma: float
    sup_err: dict[float, float]
    masked_points: int
    remainder_l2: float
    interior_zeros: int = 0


def convergence_study(
    f: Evaluator,
    d: int,
    schedule: Sequence[Sequence[int]],
    compacts: Sequence[float] = STUDY_COMPACTS,
    options: PadeOptions = PadeOptions(),
    table_for: Optional[Callable[[MultiIndex], FourierTable]] = None,
) -> list[ConvergenceRow]:
    """
    Run pade_step along a schedule of multi-degrees and record the uniform error on tori
    of radius r, masking points where q* nearly vanishes. `interior_zeros` counts the
    polished near zeros of q* that pole_probe found inside the polydisk.
    """
    rows = []
    for n in schedule:
        n = as_multi_index(n)
        if len(n) != d:
            raise BoxMismatch(f"Schedule entry {n} does not have {d} components")
        two_n = tuple(2 * k for k in n)
        table = table_for(two_n) if table_for else taylor_from_evaluator(f, two_n)
        report = pade_step(table, f, n, options)
        errors: dict[float, float] = {}
        masked = 0
        for r in compacts:
            errors[float(r)], skipped = approximation_error(report, f, r)
            masked += skipped
        interior = sum(len(z) for r, z in report.probe.near_zeros.items() if r < 1)
        rows.append(ConvergenceRow(n, report.sigma, errors, masked, report.remainder_l2, interior))
        logger.debug(f"n = {n}: sigma = {report.sigma:.10g}, errors {errors}")
    return rows


if __name__ == "__main__":
    logging.basicConfig()
    logger.level = logging.DEBUG

    def half_sum(points: np.ndarray) -> np.ndarray:
        return points.sum(axis=1) / 2

    for row in convergence_study(half_sum, 2, [(k, k) for k in range(1, 4)]):
        logger.info(f"{row}")

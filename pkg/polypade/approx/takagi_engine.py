import logging
from typing import Optional, Sequence
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from polypade.series.polyseries import (
    TrigPoly,
    BoxMismatch,
    TruncatedPoly,
    MultiIndexBox,
    reflect,
    enumerate_box,
    as_multi_index,
)

logger = logging.getLogger(__name__)

CON_EIG_RTOL = 1e-10
SYMMETRY_RTOL = 1e-13
CLUSTER_RTOL = 1e-10
SIGN_TOL = 1e-12


class ConvergenceFailure(RuntimeError):
    """A con-eigenpair failed its residual check."""


class SupportMismatch(ValueError):
    """Arguments of a Hankel form reach outside the available coefficients."""


@dataclass(frozen=True, eq=False)
class ConSymMatrix:
    """
    Complex symmetric matrix A[beta, gamma] = f_{beta + gamma - n} on the box of n.

    `truncated` is set when the symbol table did not cover every needed coefficient.
    """

    box: MultiIndexBox
    entries: np.ndarray
    truncated: bool = False

    @property
    def size(self) -> int:
        return len(self.box)

    @property
    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))


@dataclass(frozen=True, eq=False)
class ConEigPair:
    """A con-eigenpair A conj(q) = sigma q with ||q|| = 1."""

    sigma: float
    q: TruncatedPoly
    residual: float
    multiplicity: int = 1


@dataclass(frozen=True)
class ConEigOptions:
    rtol: float = CON_EIG_RTOL
    symmetry_rtol: float = SYMMETRY_RTOL
    cluster_rtol: float = CLUSTER_RTOL


def build_con_matrix(f: TruncatedPoly, n: Sequence[int]) -> ConSymMatrix:
    """
    :param f: symbol coefficients, ideally covering the box of n
    :param n: multi-degree of the approximant
    :raises BoxMismatch: on a dimension mismatch
    """
    box = enumerate_box(as_multi_index(n))
    if f.d != box.d:
        raise BoxMismatch(f"Symbol has {f.d} variables but n = {box.bound}")
    idx = box.index_array
    sums = idx[:, None, :] + idx[None, :, :] - np.asarray(box.bound)
    valid = np.all(sums >= 0, axis=-1)
    covered = np.all(sums <= np.asarray(f.bound), axis=-1)
    truncated = bool(np.any(valid & ~covered))
    if truncated:
        logger.warning(f"Symbol table {f.bound} does not cover box {box.bound}, missing entries are zero")
    take = valid & covered
    entries = np.zeros((len(box), len(box)), dtype=complex)
    entries[take] = f.dense()[tuple(sums[take].T)]
    return ConSymMatrix(box, entries, truncated)


def _real_embedding(a: np.ndarray) -> np.ndarray:
    # A = P + iQ acting antilinearly is the real symmetric map [[P, Q], [Q, -P]] on (Re, Im)
    p, q = a.real, a.imag
    return np.block([[p, q], [q, -p]])


def _check_symmetric(a: ConSymMatrix, rtol: float) -> None:
    scale = max(a.frobenius, np.finfo(float).tiny)
    asym = float(np.linalg.norm(a.entries - a.entries.T))
    if asym > rtol * scale:
        raise ValueError(f"Matrix is not complex symmetric, |A - A^T| = {asym:.3e}")


def _canonical_sign(q: np.ndarray) -> np.ndarray:
    # Only q -> -q preserves A conj(q) = sigma q with sigma real and positive
    k = int(np.argmax(np.abs(q)))
    lead = q[k]
    if abs(lead.real) > SIGN_TOL * abs(lead):
        negative = lead.real < 0
    else:
        negative = lead.imag < 0
    return -q if negative else q


def _top_subspace(basis: np.ndarray, form: np.ndarray) -> np.ndarray:
    w, c = np.linalg.eigh(form)
    keep = w >= w[-1] - 1e-12 * max(1.0, abs(w[-1]))
    return basis @ c[:, keep]


def _select_in_cluster(basis: np.ndarray, size: int, lead: int) -> np.ndarray:
    """
    Pick one vector from an eigenspace of the real embedding.

    Largest |q_lead| first, then the largest real part, so that degenerate clusters
    resolve the same way on every platform.
    """
    if basis.shape[1] > 1:
        rows = basis[[lead, size + lead], :]
        basis = _top_subspace(basis, rows.T @ rows)
    if basis.shape[1] > 1:
        re = basis[:size]
        basis = _top_subspace(basis, re.T @ re)
    return basis[:, -1]


def _to_pair(a: ConSymMatrix, sigma: float, vec: np.ndarray, multiplicity: int, rtol: float) -> ConEigPair:
    size = a.size
    q = vec[:size] + 1j * vec[size:]
    q = _canonical_sign(q / np.linalg.norm(q))
    sigma = max(float(sigma), 0.0)
    residual = float(np.linalg.norm(a.entries @ np.conj(q) - sigma * q))
    if residual > rtol * a.frobenius:
        raise ConvergenceFailure(
            f"Con-eigenpair residual {residual:.3e} exceeds {rtol:.1e} * |A| = {rtol * a.frobenius:.3e}"
        )
    return ConEigPair(sigma, TruncatedPoly(a.box, q), residual, multiplicity)


def con_eig_max(a: ConSymMatrix, options: ConEigOptions = ConEigOptions()) -> ConEigPair:
    """
    Largest con-eigenvalue of a complex symmetric matrix with its con-eigenvector.

    :raises ConvergenceFailure: if the returned pair fails the residual check
    """
    _check_symmetric(a, options.symmetry_rtol)
    w, v = scipy.linalg.eigh(_real_embedding(a.entries))
    top = w[-1]
    in_cluster = w >= top - options.cluster_rtol * max(abs(top), 1.0)
    multiplicity = int(np.count_nonzero(in_cluster))
    vec = _select_in_cluster(v[:, in_cluster], a.size, a.box.position[a.box.bound])
    pair = _to_pair(a, top, vec, multiplicity, options.rtol)
    logger.debug(f"sigma_max = {pair.sigma:.12g} (multiplicity {multiplicity}) on box {a.box.bound}")
    return pair


def con_eig_all(a: ConSymMatrix, options: ConEigOptions = ConEigOptions()) -> list[ConEigPair]:
    """All con-eigenpairs, sigma descending."""
    _check_symmetric(a, options.symmetry_rtol)
    w, v = scipy.linalg.eigh(_real_embedding(a.entries))
    order = np.argsort(-w, kind="stable")[: a.size]
    pairs = []
    for k in order:
        close = np.abs(w[order] - w[k]) <= options.cluster_rtol * max(abs(w[k]), 1.0)
        pairs.append(_to_pair(a, w[k], v[:, k], int(np.count_nonzero(close)), options.rtol))
    return pairs


def schmidt_check(a: ConSymMatrix, pair: ConEigPair) -> tuple[float, float]:
    """Residuals of A conj(q) = sigma q and A^* q = sigma conj(q)."""
    q = pair.q.coeffs
    r1 = float(np.linalg.norm(a.entries @ np.conj(q) - pair.sigma * q))
    r2 = float(np.linalg.norm(a.entries.conj().T @ q - pair.sigma * np.conj(q)))
    return r1, r2


def linear_toeplitz_matrix(f: TruncatedPoly, n: Sequence[int]) -> np.ndarray:
    """M[beta, gamma] = f_{beta - gamma}, the matrix of multiplication by f on the box of n."""
    box = enumerate_box(as_multi_index(n))
    idx = box.index_array
    diff = idx[:, None, :] - idx[None, :, :]
    take = np.all(diff >= 0, axis=-1) & np.all(diff <= np.asarray(f.bound), axis=-1)
    out = np.zeros((len(box), len(box)), dtype=complex)
    out[take] = f.dense()[tuple(diff[take].T)]
    return out


def reversal_permutation(n: Sequence[int]) -> np.ndarray:
    """The permutation matrix J sending e_beta to e_{n - beta}."""
    box = enumerate_box(as_multi_index(n))
    perm = [box.position[tuple(np.subtract(box.bound, b))] for b in box.indices]
    return np.eye(len(box))[perm]


def c_symmetry_check(f: TruncatedPoly, n: Sequence[int]) -> float:
    """||J conj(M) J - M^*||_F, zero up to rounding for every symbol."""
    m = linear_toeplitz_matrix(f, n)
    j = reversal_permutation(n)
    return float(np.linalg.norm(j @ np.conj(m) @ j - m.conj().T))


def hankel_form(f: TruncatedPoly, q: TrigPoly, r: TrigPoly, n: Optional[Sequence[int]] = None) -> complex:
    """
    Bilinear Hankel form sum f_{-(beta + gamma)} q_beta r_gamma.

    :param n: when given, q and r must be supported in [-n, n]
    :raises SupportMismatch: if the supports exceed n or f does not cover the needed indices
    """
    if q.d != f.d or r.d != f.d:
        raise SupportMismatch(f"Dimension mismatch: f has {f.d}, q has {q.d}, r has {r.d}")
    if n is not None:
        bound = as_multi_index(n)
        for name, t in (("q", q), ("r", r)):
            if any(s > b for s, b in zip(t.span, bound)):
                raise SupportMismatch(f"{name} has span {t.span} beyond {bound}")
    need = tuple(a + b for a, b in zip(q.span, r.span))
    if any(k > b for k, b in zip(need, f.bound)):
        raise SupportMismatch(f"Symbol table {f.bound} does not cover indices up to {need}")
    total = 0j
    for beta, qb in q.coeffs.items():
        for gamma, rg in r.coeffs.items():
            alpha = tuple(-(b + g) for b, g in zip(beta, gamma))
            if min(alpha) >= 0:
                total += f[alpha] * qb * rg
    return complex(total)


def hankel_extremal(f: TruncatedPoly, n: Sequence[int], options: ConEigOptions = ConEigOptions()) -> tuple[float, TrigPoly]:
    """
    sigma for the box of 2n together with the unit-norm element of the Hankel domain
    on [-n, n] attaining Re H(q, q) = sigma.
    """
    n = as_multi_index(n)
    two_n = tuple(2 * k for k in n)
    pair = con_eig_max(build_con_matrix(f, two_n), options)
    q = TrigPoly.from_poly(reflect(pair.q, two_n), shift=tuple(-k for k in n))
    return pair.sigma, q


if __name__ == "__main__":
    logging.basicConfig()
    logger.level = logging.DEBUG
    half_sum = TruncatedPoly.from_mapping({(1, 0): 0.5, (0, 1): 0.5}, (2, 2))
    top = con_eig_max(build_con_matrix(half_sum, (1, 1)))
    logger.info(f"sigma = {top.sigma}, q = {top.q.support(1e-12)}")

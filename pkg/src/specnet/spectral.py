"""Spectral decomposition of graph signals into frequency bands.

Eigendecomposition is computed here from scratch: cyclic Jacobi rotations
for tiny matrices, Householder tridiagonalization followed by implicitly
shifted QL iteration otherwise. Results are deterministic given identical
input bytes; eigenvector sign follows a fixed convention and every
decomposition is self-validated before it is returned.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, NumericalError
from .graphs import (
    Graph,
    adjacency,
    laplacian,
    normalized_laplacian,
    one_hot_features,
)

__all__ = [
    "SpectralBasis",
    "BandSplit",
    "EnergyProfile",
    "BandFeatures",
    "eigendecompose_sym",
    "spectral_basis",
    "band_cutoff",
    "band_split",
    "gft",
    "igft",
    "band_filter",
    "spectral_energy",
    "domain_energy_profile",
    "pairwise_spectral_difference",
    "graph_band_features",
]

_JACOBI_MAX_DIM = 8
_QL_ITER_CAP = 50
_EPS = float(np.finfo(np.float64).eps)

RESIDUAL_TOL = 1e-8
ORTHONORMALITY_TOL = 1e-10

SOURCES = ("combinatorial", "normalized")


@dataclass(frozen=True)
class SpectralBasis:
    """Eigensystem of a graph operator: ascending eigenvalues, orthonormal
    eigenvector columns (vectors[:, i] pairs with eigenvalues[i]), and the
    operator the system came from."""

    eigenvalues: np.ndarray
    vectors: np.ndarray
    source: str

    @property
    def size(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(frozen=True)
class BandSplit:
    """Partition of spectral indices: the ceil(rho * n) smallest
    eigenvalues form the low band, the rest the high band."""

    cutoff_fraction: float
    size: int

    def __post_init__(self):
        if not (0.0 < self.cutoff_fraction < 1.0):
            raise ContractViolation(
                f"cutoff fraction must lie in (0, 1), got {self.cutoff_fraction}"
            )
        if self.size < 1:
            raise ContractViolation("band split needs at least one mode")

    @property
    def cutoff(self) -> int:
        return band_cutoff(self.size, self.cutoff_fraction)

    @property
    def low_indices(self) -> np.ndarray:
        return np.arange(0, self.cutoff)

    @property
    def high_indices(self) -> np.ndarray:
        return np.arange(self.cutoff, self.size)


@dataclass(frozen=True)
class EnergyProfile:
    """Normalized split of signal energy between the two bands.

    low_energy + high_energy = 1 whenever the signal is nonzero; the
    zero-energy signal maps to the (0.5, 0.5) convention.
    """

    low_energy: float
    high_energy: float


@dataclass(frozen=True)
class BandFeatures:
    """Per-graph encoder inputs: dense adjacency plus the node-domain
    low- and high-frequency components of the one-hot label signal."""

    adjacency: np.ndarray
    low: np.ndarray
    high: np.ndarray


def _matrix_tag(M: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(M).tobytes()).hexdigest()[:12]


def _fix_signs(V: np.ndarray) -> None:
    """Flip each column so its first component above tolerance is positive."""
    n = V.shape[0]
    for j in range(V.shape[1]):
        col = V[:, j]
        for i in range(n):
            if abs(col[i]) > 1e-12:
                if col[i] < 0.0:
                    V[:, j] = -col
                break


def _jacobi(A: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi eigendecomposition for small symmetric matrices."""
    n = A.shape[0]
    M = A.astype(np.float64, copy=True)
    V = np.eye(n)
    scale = max(1.0, float(np.abs(M).max()))
    for _ in range(50 * n):
        off = math.sqrt(float(np.sum(np.tril(M, -1) ** 2)))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = M[p, q]
                if abs(apq) <= 1e-18 * scale:
                    continue
                theta = (M[q, q] - M[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0)
                )
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                rp, rq = M[p, :].copy(), M[q, :].copy()
                M[p, :] = c * rp - s * rq
                M[q, :] = s * rp + c * rq
                cp, cq = M[:, p].copy(), M[:, q].copy()
                M[:, p] = c * cp - s * cq
                M[:, q] = s * cp + c * cq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    else:
        raise NumericalError(
            f"jacobi rotation failed to converge (matrix {_matrix_tag(A)})"
        )
    return np.diag(M).copy(), V


def _tridiagonalize(A: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Householder reduction to tridiagonal form; returns (d, e, Q) with
    Q.T @ A @ Q tridiagonal, d the diagonal, e the subdiagonal."""
    n = A.shape[0]
    T = A.astype(np.float64, copy=True)
    Q = np.eye(n)
    for k in range(n - 2):
        x = T[k + 1:, k]
        normx = math.sqrt(float(x @ x))
        if normx == 0.0:
            continue
        v = x.copy()
        v[0] += math.copysign(normx, x[0] if x[0] != 0.0 else 1.0)
        vnorm2 = float(v @ v)
        if vnorm2 == 0.0:
            continue
        beta = 2.0 / vnorm2
        # symmetric rank-2 update of the trailing block
        B = T[k + 1:, k + 1:]
        p = beta * (B @ v)
        kappa = 0.5 * beta * float(p @ v)
        q = p - kappa * v
        B -= np.outer(q, v) + np.outer(v, q)
        alpha = -math.copysign(normx, x[0] if x[0] != 0.0 else 1.0)
        T[k + 1, k] = alpha
        T[k, k + 1] = alpha
        T[k + 2:, k] = 0.0
        T[k, k + 2:] = 0.0
        Qb = Q[:, k + 1:]
        Qb -= beta * np.outer(Qb @ v, v)
    d = np.diag(T).copy()
    e = np.zeros(n)
    if n > 1:
        e[:-1] = np.diag(T, -1)
    return d, e, Q


def _ql_implicit(d: np.ndarray, e: np.ndarray, V: np.ndarray, tag: str) -> None:
    """Implicitly shifted QL iteration on a tridiagonal system, eigenvectors
    accumulated into V in place. e[i] couples d[i] and d[i+1]."""
    n = d.shape[0]
    for l in range(n):
        iterations = 0
        while True:
            m = l
            while m < n - 1:
                dd = abs(d[m]) + abs(d[m + 1])
                if abs(e[m]) <= _EPS * dd:
                    break
                m += 1
            if m == l:
                break
            iterations += 1
            if iterations > _QL_ITER_CAP:
                raise NumericalError(
                    f"ql iteration exceeded {_QL_ITER_CAP} steps for one "
                    f"eigenvalue (matrix {tag})"
                )
            g = (d[l + 1] - d[l]) / (2.0 * e[l])
            r = math.hypot(g, 1.0)
            g = d[m] - d[l] + e[l] / (g + math.copysign(r, g))
            s, c = 1.0, 1.0
            p = 0.0
            for i in range(m - 1, l - 1, -1):
                f = s * e[i]
                b = c * e[i]
                r = math.hypot(f, g)
                e[i + 1] = r
                if r == 0.0:
                    d[i + 1] -= p
                    e[m] = 0.0
                    break
                s = f / r
                c = g / r
                g = d[i + 1] - p
                r = (d[i] - g) * s + 2.0 * c * b
                p = s * r
                d[i + 1] = g + p
                g = c * r - b
                f = V[:, i + 1].copy()
                V[:, i + 1] = s * V[:, i] + c * f
                V[:, i] = c * V[:, i] - s * f
            else:
                d[l] -= p
                e[l] = g
                e[m] = 0.0


def eigendecompose_sym(M, source: str = "combinatorial") -> SpectralBasis:
    """Full eigendecomposition of a dense symmetric matrix.

    Eigenvalues come back ascending with orthonormal eigenvector columns;
    each column's first component above tolerance is made positive so the
    result is bit-reproducible. The decomposition is checked against the
    input (per-pair residual, orthonormality) and a NumericalError names
    the offending matrix if either check fails.
    """
    if source not in SOURCES:
        raise ContractViolation(f"unknown operator source {source!r}")
    A = np.asarray(M, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"expected a square matrix, got shape {A.shape}")
    if A.shape[0] < 1:
        raise ContractViolation("matrix must have dimension >= 1")
    if not np.all(np.isfinite(A)):
        raise ContractViolation("matrix contains non-finite entries")
    scale = max(1.0, float(np.abs(A).max()))
    if float(np.abs(A - A.T).max()) > 1e-10 * scale:
        raise ContractViolation("matrix is not symmetric")
    n = A.shape[0]
    if n == 1:
        return SpectralBasis(A[0].copy(), np.ones((1, 1)), source)

    tag = _matrix_tag(A)
    if n <= _JACOBI_MAX_DIM:
        w, V = _jacobi(A)
    else:
        d, e, V = _tridiagonalize(A)
        _ql_implicit(d, e, V, tag)
        w = d

    order = np.argsort(w, kind="stable")
    w = w[order]
    V = np.ascontiguousarray(V[:, order])
    _fix_signs(V)

    fro = max(1.0, float(np.sqrt(np.sum(A * A))))
    residual = float(np.sqrt(((A @ V - V * w) ** 2).sum(axis=0)).max())
    if residual > RESIDUAL_TOL * fro:
        raise NumericalError(
            f"eigendecomposition residual {residual:.3e} exceeds "
            f"{RESIDUAL_TOL:.0e} * max(1, ||A||_F) (matrix {tag})"
        )
    ortho = float(np.abs(V.T @ V - np.eye(n)).max())
    if ortho > ORTHONORMALITY_TOL:
        raise NumericalError(
            f"eigenvector orthonormality defect {ortho:.3e} exceeds "
            f"{ORTHONORMALITY_TOL:.0e} (matrix {tag})"
        )
    return SpectralBasis(w, V, source)


def spectral_basis(g: Graph, operator: str = "normalized") -> SpectralBasis:
    """Eigensystem of a graph's Laplacian; the normalized operator is the
    default because its [0, 2] spectrum is comparable across graph sizes."""
    if operator == "normalized":
        return eigendecompose_sym(normalized_laplacian(g), source="normalized")
    if operator == "combinatorial":
        return eigendecompose_sym(laplacian(g), source="combinatorial")
    raise ContractViolation(f"unknown operator {operator!r}")


def band_cutoff(n: int, rho: float) -> int:
    """Number of modes in the low band: ceil(rho * n), guarded against
    float wobble in the product (0.3 * 10 must give 3, not 4)."""
    if not (0.0 < rho < 1.0):
        raise ContractViolation(f"rho must lie in (0, 1), got {rho}")
    if n < 1:
        raise ContractViolation("need at least one mode")
    return min(n, int(math.ceil(rho * n - 1e-9)))


def band_split(basis: SpectralBasis, rho: float) -> BandSplit:
    return BandSplit(cutoff_fraction=rho, size=basis.size)


def gft(basis: SpectralBasis, X: np.ndarray) -> np.ndarray:
    """Forward transform: node-domain signal to spectral coefficients."""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[0] != basis.size:
        raise ContractViolation(
            f"signal has {X.shape[0]} rows for a basis of size {basis.size}"
        )
    return basis.vectors.T @ X


def igft(basis: SpectralBasis, coeffs: np.ndarray) -> np.ndarray:
    """Inverse transform: spectral coefficients back to the node domain."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    if coeffs.shape[0] != basis.size:
        raise ContractViolation(
            f"coefficients have {coeffs.shape[0]} rows for a basis of size "
            f"{basis.size}"
        )
    return basis.vectors @ coeffs


def band_filter(
    basis: SpectralBasis, X: np.ndarray, split: BandSplit
) -> tuple[np.ndarray, np.ndarray]:
    """Split a node-domain signal into low- and high-frequency components.

    Both components live in the node domain and sum to X up to roundoff.
    """
    if split.size != basis.size:
        raise ContractViolation("band split does not match basis size")
    coeffs = gft(basis, X)
    c = split.cutoff
    low = basis.vectors[:, :c] @ coeffs[:c]
    high = basis.vectors[:, c:] @ coeffs[c:]
    return low, high


def spectral_energy(basis: SpectralBasis, X: np.ndarray, split: BandSplit) -> EnergyProfile:
    """Fraction of signal energy in each band (squared spectral
    coefficients, summed over feature columns and normalized)."""
    if split.size != basis.size:
        raise ContractViolation("band split does not match basis size")
    coeffs = gft(basis, X)
    if coeffs.ndim == 1:
        per_mode = coeffs**2
    else:
        per_mode = np.sum(coeffs**2, axis=1)
    total = float(per_mode.sum())
    if total == 0.0:
        return EnergyProfile(0.5, 0.5)
    low = float(per_mode[: split.cutoff].sum()) / total
    return EnergyProfile(low, 1.0 - low)


def domain_energy_profile(graphs, vocab_size: int, rho: float) -> EnergyProfile:
    """Unweighted mean of per-graph band-energy profiles over a domain,
    with one-hot node labels as the signal."""
    graphs = list(graphs)
    if not graphs:
        raise ContractViolation("empty domain")
    low_acc = 0.0
    high_acc = 0.0
    for g in graphs:
        basis = spectral_basis(g)
        profile = spectral_energy(
            basis, one_hot_features(g, vocab_size), band_split(basis, rho)
        )
        low_acc += profile.low_energy
        high_acc += profile.high_energy
    return EnergyProfile(low_acc / len(graphs), high_acc / len(graphs))


def pairwise_spectral_difference(
    domain_a, domain_b, vocab_size: int, rho: float
) -> tuple[float, float]:
    """Absolute band-energy gaps (delta_low, delta_high) between the mean
    profiles of two domains; symmetric in its arguments."""
    pa = domain_energy_profile(domain_a, vocab_size, rho)
    pb = domain_energy_profile(domain_b, vocab_size, rho)
    return abs(pa.low_energy - pb.low_energy), abs(pa.high_energy - pb.high_energy)


def graph_band_features(g: Graph, rho: float, vocab_size: int) -> BandFeatures:
    """Everything the dual-stream encoder needs for one graph: adjacency
    plus band-filtered one-hot features. Pure function of the graph, so
    results can be cached and shared across seeds and run variants."""
    basis = spectral_basis(g)
    X = one_hot_features(g, vocab_size)
    low, high = band_filter(basis, X, band_split(basis, rho))
    return BandFeatures(adjacency=adjacency(g), low=low, high=high)

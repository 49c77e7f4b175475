"""Unnormalized graph Laplacian, its eigendecomposition, eigengap speaker counting."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .affinity import SYMMETRIC, AffinityMatrix
from .errors import InvalidInputError, NumericalError

DEFAULT_K_MAX = 10


@dataclass(eq=False)
class Laplacian:
    w: np.ndarray
    degrees: np.ndarray

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass(eq=False)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # ascending
    eigenvectors: np.ndarray  # column i pairs with eigenvalues[i]

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


@dataclass(eq=False)
class SpectralEmbedding:
    k: int
    points: np.ndarray


def laplacian(m: AffinityMatrix) -> Laplacian:
    """W = D - M with D the diagonal matrix of row sums of M."""
    if m.state != SYMMETRIC:
        raise InvalidInputError(f"laplacian expects a symmetric affinity, got {m.state}")
    degrees = m.values.sum(axis=1)
    w = -m.values.copy()
    w[np.diag_indices_from(w)] += degrees
    return Laplacian(w, degrees)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # largest-magnitude entry of each column made positive; argmax picks the first on ties
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0] = 1.0
    return vectors * signs


def eig_sym(lap: Laplacian) -> SpectralDecomposition:
    """Full dense symmetric eigendecomposition, eigenvalues ascending.

    Eigenvector signs are fixed so that the largest-magnitude entry of each
    column is positive, which makes the output reproducible across LAPACK builds
    up to rounding.
    """
    w = lap.w
    if not np.all(np.isfinite(w)):
        raise NumericalError("Laplacian contains non-finite entries", size=w.shape[0])
    try:
        vals, vecs = np.linalg.eigh(w)
    except np.linalg.LinAlgError as exc:
        # LAPACK does not report how many sweeps it ran
        raise NumericalError(f"symmetric eigensolver did not converge: {exc}", size=w.shape[0]) from exc
    return SpectralDecomposition(vals, _fix_signs(vecs))


def estimate_k(dec, k_max: int = DEFAULT_K_MAX) -> int:
    """Speaker count from the largest gap between consecutive ascending eigenvalues.

    Returns the 1-based index i in 1..min(k_max, N-1) maximizing
    lambda[i+1] - lambda[i]; the first (smallest) index wins ties.

    Parameters
    ----------
    dec : SpectralDecomposition or array_like
        Decomposition, or directly the ascending eigenvalue list.
    k_max : int
        Upper bound on the returned count.
    """
    vals = np.asarray(getattr(dec, "eigenvalues", dec), dtype=np.float64)
    if k_max < 1:
        raise InvalidInputError(f"k_max must be positive, got {k_max}")
    n = vals.shape[0]
    if n <= 1:
        return 1
    upper = min(k_max, n - 1)
    gaps = np.diff(vals[: upper + 1])
    return int(np.argmax(gaps)) + 1


def spectral_embed(dec: SpectralDecomposition, k: int) -> SpectralEmbedding:
    """Rows of the N x k matrix of eigenvectors of the k smallest eigenvalues."""
    if not (1 <= k <= dec.n):
        raise InvalidInputError(f"k must lie in [1, {dec.n}], got {k}")
    return SpectralEmbedding(k, np.ascontiguousarray(dec.eigenvectors[:, :k]))

"""Cosine affinity, row-wise pruning and symmetrization."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

RAW, PRUNED, SYMMETRIC = "raw", "pruned", "symmetric"

# Absorbs float error in N*(1 - alpha) so grid values like alpha=0.07 hit the exact ceiling.
_CEIL_SLACK = 1e-9


@dataclass(eq=False)
class AffinityMatrix:
    values: np.ndarray
    state: str = RAW

    @property
    def n(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class PruningConfig:
    alpha: float

    def __post_init__(self):
        if not (0.0 <= self.alpha <= 1.0):
            raise InvalidInputError(f"alpha must lie in [0, 1], got {self.alpha}")


def n_pruned(n: int, alpha: float) -> int:
    """Number of entries the pruning rule asks to zero per row: ceil(N(1 - alpha))."""
    return max(0, math.ceil(n * (1.0 - alpha) - _CEIL_SLACK))


def keep_count(n: int, alpha: float) -> int:
    """Entries retained per row; never fewer than one."""
    return max(1, n - n_pruned(n, alpha))


def cosine_affinity(vectors) -> AffinityMatrix:
    """Pairwise cosine similarity of embedding rows.

    Accepts a ``SegmentEmbeddings`` or an ``(N, d)`` array. The result is
    symmetric by construction (upper triangle mirrored) with a unit diagonal.
    """
    x = np.asarray(getattr(vectors, "vectors", vectors), dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1:
        raise InvalidInputError("need at least one embedding vector")
    norms = np.linalg.norm(x, axis=1)
    bad = np.flatnonzero(~(norms > 0) | ~np.isfinite(norms))
    if bad.size:
        raise InvalidInputError(f"segment {int(bad[0])} has a zero-norm or non-finite embedding")
    unit = x / norms[:, None]
    gram = unit @ unit.T
    upper = np.triu(gram, 1)
    sim = upper + upper.T
    np.clip(sim, -1.0, 1.0, out=sim)
    np.fill_diagonal(sim, 1.0)
    return AffinityMatrix(sim, RAW)


def prune_rows(m: AffinityMatrix, cfg: PruningConfig) -> AffinityMatrix:
    """Zero the ceil(N(1-alpha)) smallest entries of every row.

    At least one entry per row survives. Among equal values the one with the
    smaller column index is kept.
    """
    if m.state != RAW:
        raise InvalidInputError(f"prune_rows expects a raw affinity, got {m.state}")
    n = m.n
    keep = keep_count(n, cfg.alpha)
    out = np.zeros_like(m.values)
    if keep >= n:
        out[:] = m.values
        return AffinityMatrix(out, PRUNED)
    # stable sort on the negated row: descending values, ties in column order
    order = np.argsort(-m.values, axis=1, kind="stable")[:, :keep]
    rows = np.arange(n)[:, None]
    out[rows, order] = m.values[rows, order]
    return AffinityMatrix(out, PRUNED)


def symmetrize(m: AffinityMatrix) -> AffinityMatrix:
    """(M + M^T) / 2."""
    if m.state != PRUNED:
        raise InvalidInputError(f"symmetrize expects a pruned affinity, got {m.state}")
    v = m.values
    return AffinityMatrix((v + v.T) / 2.0, SYMMETRIC)

"""Per-recording diarization: windowing, spectral clustering, turn assembly."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .affinity import AffinityMatrix, PruningConfig, cosine_affinity, prune_rows, symmetrize
from .errors import InvalidInputError
from .io_formats import SegmentEmbeddings, SpeechRegion, Turn
from .kmeans import DEFAULT_RESTARTS, kmeans
from .spectral import DEFAULT_K_MAX, eig_sym, estimate_k, laplacian, spectral_embed

log = logging.getLogger(__name__)

WINDOW = 3.0
SHIFT = 1.5
MIN_SEG = 0.3
_EPS = 1e-9


@dataclass(frozen=True)
class PipelineConfig:
    alpha: float = 1.0
    window: float = WINDOW
    shift: float = SHIFT
    k_max: int = DEFAULT_K_MAX
    oracle_k: Optional[int] = None
    seed: int = 42
    restarts: int = DEFAULT_RESTARTS

    def __post_init__(self):
        if not (0 < self.shift <= self.window):
            raise InvalidInputError(f"need 0 < shift <= window, got shift={self.shift}, window={self.window}")
        PruningConfig(self.alpha)
        if self.k_max < 1:
            raise InvalidInputError(f"k_max must be positive, got {self.k_max}")
        if self.oracle_k is not None and self.oracle_k < 1:
            raise InvalidInputError(f"oracle_k must be positive, got {self.oracle_k}")


@dataclass(eq=False)
class Diarization:
    turns: List[Turn]
    labels: np.ndarray
    n_speakers: int
    k: int = 0
    eigenvalues: Optional[np.ndarray] = field(default=None, repr=False)


def segment_regions(regions: Sequence[SpeechRegion], window: float = WINDOW, shift: float = SHIFT,
                    min_seg: float = MIN_SEG) -> List[Tuple[float, float]]:
    """Cut each speech region into fixed windows.

    Windows start every ``shift`` seconds and must end inside the region. An
    uncovered tail gets one extra window aligned to the region end (clipped to
    the region start), as long as the region is at least ``min_seg`` long.
    """
    segments: List[Tuple[float, float]] = []
    for r in regions:
        a, b = r.onset, r.offset
        if b - a < min_seg - _EPS:
            continue
        last_end = a
        i = 0
        while a + i * shift + window <= b + _EPS:
            start = a + i * shift
            end = min(start + window, b)
            segments.append((start, end))
            last_end = end
            i += 1
        if last_end < b - _EPS:
            segments.append((max(a, b - window), b))
    return segments


def labels_to_turns(segments: Sequence[Tuple[float, float]], labels: Sequence[int],
                    recording_id: str = "rec", names: Optional[Sequence[str]] = None) -> List[Turn]:
    """Merge labelled segments into non-overlapping single-speaker turns.

    Same-label segments that overlap or touch are merged. Where consecutive
    segments with different labels overlap, the cut goes at the middle of the
    shared interval.
    """
    if len(segments) != len(labels):
        raise InvalidInputError(f"{len(segments)} segments but {len(labels)} labels")
    if names is None:
        names = [f"spk{j}" for j in range(int(max(labels, default=-1)) + 1)]

    spans: List[List] = []  # [start, end, label]
    for (s, e), lab in zip(segments, labels):
        lab = int(lab)
        if not spans or s > spans[-1][1]:
            spans.append([s, e, lab])
            continue
        cur = spans[-1]
        if lab == cur[2]:
            cur[1] = max(cur[1], e)
            continue
        old_end = cur[1]
        mid = max((s + min(old_end, e)) / 2.0, cur[0])
        cur[1] = mid
        if cur[1] <= cur[0]:
            spans.pop()
        if spans and spans[-1][2] == lab and spans[-1][1] >= mid:
            spans[-1][1] = max(spans[-1][1], e)
        else:
            spans.append([mid, e, lab])
        if old_end > e:
            # nested segment: the earlier speaker resumes after it
            spans.append([e, old_end, cur[2]])

    return [
        Turn(recording_id, start, end - start, names[lab])
        for start, end, lab in spans
        if end > start
    ]


def cluster_affinity(raw: AffinityMatrix, cfg: PipelineConfig):
    """Prune, symmetrize, decompose and cluster a raw affinity.

    Returns ``(labels, k, eigenvalues)``.
    """
    n = raw.n
    if n == 1:
        return np.zeros(1, dtype=np.int64), 1, np.zeros(1)
    sym = symmetrize(prune_rows(raw, PruningConfig(cfg.alpha)))
    dec = eig_sym(laplacian(sym))
    if cfg.oracle_k is not None:
        k = min(cfg.oracle_k, n)
        if k < cfg.oracle_k:
            log.warning("oracle_k=%d exceeds %d segments; using %d", cfg.oracle_k, n, k)
    else:
        k = estimate_k(dec, cfg.k_max)
    emb = spectral_embed(dec, k)
    result = kmeans(emb.points, k, seed=cfg.seed, restarts=cfg.restarts)
    return result.labels, k, dec.eigenvalues


def diarize_detailed(e: SegmentEmbeddings, cfg: PipelineConfig, raw: Optional[AffinityMatrix] = None) -> Diarization:
    """Like :func:`diarize` but also returns segment labels and the speaker count used.

    ``raw`` lets callers reuse a precomputed cosine affinity across pruning values.
    """
    if len(e) == 0:
        return Diarization([], np.zeros(0, dtype=np.int64), 0, 0)
    if raw is None:
        raw = cosine_affinity(e)
    labels, k, vals = cluster_affinity(raw, cfg)
    turns = labels_to_turns(e.segments, labels, e.recording_id)
    return Diarization(turns, labels, int(len(set(labels.tolist()))), k, vals)


def diarize(e: SegmentEmbeddings, cfg: PipelineConfig) -> List[Turn]:
    """Spectral-clustering diarization of one recording; speakers named spk0, spk1, ..."""
    return diarize_detailed(e, cfg).turns


def check_segments(e: SegmentEmbeddings, regions: Sequence[SpeechRegion]) -> None:
    """Raise if any embedding segment falls outside the recording's speech regions."""
    spans = sorted((r.onset, r.offset) for r in regions if r.recording_id == e.recording_id)
    for idx, (s, t) in enumerate(e.segments):
        if not any(a - _EPS <= s and t <= b + _EPS for a, b in spans):
            raise InvalidInputError(
                f"segment {idx} [{s}, {t}] of {e.recording_id!r} lies outside its SAD regions"
            )

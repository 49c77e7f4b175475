"""Diarization error rate with optimal speaker mapping and a reference-boundary collar."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import InvalidInputError, UndefinedDerError
from .io_formats import Turn

DEFAULT_COLLAR = 0.25

Interval = Tuple[float, float]


@dataclass(frozen=True)
class ScoringConfig:
    collar: float = DEFAULT_COLLAR

    def __post_init__(self):
        if not (self.collar >= 0):
            raise InvalidInputError(f"collar must be >= 0, got {self.collar}")


@dataclass(frozen=True)
class DerBreakdown:
    missed: float
    false_alarm: float
    speaker_error: float
    scored_ref: float

    @property
    def errors(self) -> float:
        return self.missed + self.false_alarm + self.speaker_error

    @property
    def der(self) -> float:
        if self.scored_ref <= 0:
            raise UndefinedDerError("no scored reference speech")
        return self.errors / self.scored_ref

    @property
    def der_percent(self) -> float:
        return 100.0 * self.der


def _union(intervals: Iterable[Interval]) -> List[Interval]:
    merged: List[List[float]] = []
    for a, b in sorted(intervals):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return [(a, b) for a, b in merged]


def _intersect(xs: Sequence[Interval], ys: Sequence[Interval]) -> List[Interval]:
    out = []
    i = j = 0
    while i < len(xs) and j < len(ys):
        lo = max(xs[i][0], ys[j][0])
        hi = min(xs[i][1], ys[j][1])
        if hi > lo:
            out.append((lo, hi))
        if xs[i][1] < ys[j][1]:
            i += 1
        else:
            j += 1
    return out


def _length(intervals: Iterable[Interval]) -> float:
    return sum(b - a for a, b in intervals)


def speaker_timelines(turns: Iterable[Turn]) -> Dict[str, List[Interval]]:
    """Union of each speaker's turns, keyed by speaker in order of first appearance."""
    spans: Dict[str, List[Interval]] = {}
    for t in turns:
        spans.setdefault(t.speaker, []).append((t.onset, t.offset))
    return {spk: _union(iv) for spk, iv in spans.items()}


def scored_timeline(ref: Sequence[Turn], cfg: ScoringConfig = ScoringConfig()) -> List[Interval]:
    """The time axis minus collar zones around every reference onset and offset.

    The outer intervals are unbounded (``-inf`` / ``inf``).
    """
    if cfg.collar == 0:
        return [(-math.inf, math.inf)]
    zones = []
    for t in ref:
        for edge in (t.onset, t.offset):
            zones.append((edge - cfg.collar, edge + cfg.collar))
    excluded = _union(zones)
    out: List[Interval] = []
    start = -math.inf
    for a, b in excluded:
        out.append((start, a))
        start = b
    out.append((start, math.inf))
    return out


def overlap_matrix(ref: Sequence[Turn], hyp: Sequence[Turn],
                   scored: Optional[Sequence[Interval]] = None):
    """Overlap durations between reference (rows) and hypothesis (columns) speakers."""
    ref_tl = speaker_timelines(ref)
    hyp_tl = speaker_timelines(hyp)
    if scored is not None:
        ref_tl = {s: _intersect(iv, scored) for s, iv in ref_tl.items()}
    mat = np.zeros((len(ref_tl), len(hyp_tl)))
    for i, r in enumerate(ref_tl.values()):
        for j, h in enumerate(hyp_tl.values()):
            mat[i, j] = _length(_intersect(r, h))
    return list(ref_tl), list(hyp_tl), mat


def optimal_mapping(ref: Sequence[Turn], hyp: Sequence[Turn],
                    scored: Optional[Sequence[Interval]] = None) -> Dict[str, str]:
    """Hypothesis-to-reference speaker map maximizing total overlapped duration.

    Solved as a linear assignment (Hungarian method via scipy). Pairs with zero
    overlap are left out of the map, so unmatched speakers map to nothing.
    When ``scored`` is given, overlap is measured only inside those intervals.
    """
    ref_spk, hyp_spk, mat = overlap_matrix(ref, hyp, scored)
    if mat.size == 0:
        return {}
    rows, cols = linear_sum_assignment(mat, maximize=True)
    return {hyp_spk[c]: ref_spk[r] for r, c in zip(rows, cols) if mat[r, c] > 0}


def compute_der(ref: Sequence[Turn], hyp: Sequence[Turn],
                cfg: ScoringConfig = ScoringConfig()) -> DerBreakdown:
    """Missed speech, false alarm and speaker error over the scored timeline.

    Time is cut at every reference/hypothesis boundary and collar edge; each
    atomic interval contributes according to how many reference and
    hypothesis speakers are active in it and how many of those are mapped
    pairs.
    """
    if not ref:
        raise UndefinedDerError("reference annotation is empty")
    scored = scored_timeline(ref, cfg)
    mapping = optimal_mapping(ref, hyp, scored)

    ref_tl = speaker_timelines(ref)
    hyp_tl = speaker_timelines(hyp)
    points = set()
    for tl in (ref_tl, hyp_tl):
        for spans in tl.values():
            for a, b in spans:
                points.update((a, b))
    for a, b in scored:
        points.update(p for p in (a, b) if math.isfinite(p))
    cuts = sorted(points)

    def active(tl, lo, hi):
        out = set()
        for spk, spans in tl.items():
            for a, b in spans:
                if a <= lo and hi <= b:
                    out.add(spk)
                    break
        return out

    missed = fa = spk_err = total = 0.0
    si = 0
    for lo, hi in zip(cuts, cuts[1:]):
        d = hi - lo
        if d <= 0:
            continue
        while si < len(scored) and scored[si][1] <= lo:
            si += 1
        if si >= len(scored) or not (scored[si][0] <= lo and hi <= scored[si][1]):
            continue
        r_act = active(ref_tl, lo, hi)
        h_act = active(hyp_tl, lo, hi)
        n_ref, n_hyp = len(r_act), len(h_act)
        if n_ref == 0 and n_hyp == 0:
            continue
        correct = sum(1 for h in h_act if mapping.get(h) in r_act)
        missed += d * max(0, n_ref - n_hyp)
        fa += d * max(0, n_hyp - n_ref)
        spk_err += d * (min(n_ref, n_hyp) - correct)
        total += d * n_ref
    return DerBreakdown(missed, fa, spk_err, total)


def aggregate_der(per_recording: Sequence[DerBreakdown]) -> DerBreakdown:
    """Time-weighted corpus total: component-wise sums."""
    if not per_recording:
        raise InvalidInputError("nothing to aggregate")
    agg = DerBreakdown(
        sum(b.missed for b in per_recording),
        sum(b.false_alarm for b in per_recording),
        sum(b.speaker_error for b in per_recording),
        sum(b.scored_ref for b in per_recording),
    )
    if agg.scored_ref <= 0:
        raise UndefinedDerError("total scored reference time is zero")
    return agg


def speaker_count_error(pairs: Sequence[Tuple[int, int]]) -> float:
    """Mean absolute difference between true and estimated speaker counts."""
    if not pairs:
        raise InvalidInputError("speaker_count_error needs at least one recording")
    return sum(abs(est - true) for true, est in pairs) / len(pairs)


def breakdown_tsv(rows: Sequence[Tuple[str, DerBreakdown]]) -> str:
    """TSV with one row per (label, breakdown); DER column in percent."""
    out = ["recording\tmissed\tfalse_alarm\tspeaker_error\tscored_ref\tder_percent\n"]
    for name, b in rows:
        der = f"{b.der_percent:.4f}" if b.scored_ref > 0 else "nan"
        out.append(
            f"{name}\t{b.missed:.3f}\t{b.false_alarm:.3f}\t{b.speaker_error:.3f}"
            f"\t{b.scored_ref:.3f}\t{der}\n"
        )
    return "".join(out)

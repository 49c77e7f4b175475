"""Synthetic multi-speaker recordings and brute-force reference oracles.

Generated annotations put every boundary on a 10 ms grid so the frame-counting
DER oracle (1 ms frames) is exact. The oracles use exhaustive enumeration or
frame counting and share no code with the scoring and k-means modules.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .errors import InfeasibleSpecError, InvalidInputError
from .io_formats import SegmentEmbeddings, SpeechRegion, Turn, emit_rttm, emit_sad, write_embeddings
from .pipeline import SHIFT, WINDOW, segment_regions
from .scoring import DerBreakdown
from .tuning import Domain, RecordingBundle

GRID = 100  # boundaries per second (10 ms)
ANCHOR_BUDGET = 20000
_RESTART_AFTER = 1000
# anchors are drawn around a shared centre so pairwise angles land this far above the minimum
_ANGLE_MARGIN = 8.0


@dataclass(frozen=True)
class SynthSpec:
    n_speakers: int = 2
    dim: int = 192
    duration: float = 120.0
    turn_len_range: Tuple[float, float] = (5.0, 20.0)
    intra_noise: float = 0.05
    inter_min_angle: float = 75.0
    seed: int = 0
    recording_id: str = "synth"
    window: float = WINDOW
    shift: float = SHIFT

    def __post_init__(self):
        if self.n_speakers < 1:
            raise InvalidInputError(f"n_speakers must be >= 1, got {self.n_speakers}")
        if self.dim < 1:
            raise InvalidInputError(f"dim must be >= 1, got {self.dim}")
        if self.duration <= 0:
            raise InvalidInputError(f"duration must be positive, got {self.duration}")
        lo, hi = self.turn_len_range
        if not (0 < lo <= hi):
            raise InvalidInputError(f"bad turn_len_range {self.turn_len_range}")
        if self.intra_noise < 0:
            raise InvalidInputError(f"intra_noise must be >= 0, got {self.intra_noise}")
        if not (0 <= self.inter_min_angle <= 180):
            raise InvalidInputError(f"inter_min_angle must lie in [0, 180], got {self.inter_min_angle}")


def _unit(v):
    return v / np.linalg.norm(v)


def sample_anchors(n: int, dim: int, min_angle: float, rng, budget: int = ANCHOR_BUDGET) -> np.ndarray:
    """Unit speaker directions with every pairwise angle >= ``min_angle`` degrees.

    Below 90 degrees, candidates are spread around a random centre with a
    spread chosen so the typical pairwise angle is ``min_angle`` plus a small
    margin; otherwise candidates are isotropic. Rejection sampling, restarted
    when it stalls, within a total budget of candidate draws.
    """
    target = min(min_angle + _ANGLE_MARGIN, 90.0)
    if target < 90.0:
        # cos(angle) ~ 1 / (1 + spread^2 * dim) for centre + spread * gaussian
        spread = math.sqrt((1.0 / math.cos(math.radians(target)) - 1.0) / dim)
    else:
        spread = None
    min_cos = math.cos(math.radians(min_angle))
    draws = 0
    while draws < budget:
        centre = _unit(rng.standard_normal(dim)) if spread is not None else None
        accepted: List[np.ndarray] = []
        stalled = 0
        while len(accepted) < n and stalled < _RESTART_AFTER and draws < budget:
            draws += 1
            g = rng.standard_normal(dim)
            cand = _unit(g if spread is None else centre + spread * g)
            if all(float(cand @ a) <= min_cos + 1e-12 for a in accepted):
                accepted.append(cand)
                stalled = 0
            else:
                stalled += 1
        if len(accepted) == n:
            return np.array(accepted)
    raise InfeasibleSpecError(
        f"could not place {n} anchors {min_angle} degrees apart in {dim} dimensions within {budget} draws"
    )


def _layout_turns(spec: SynthSpec, rng) -> List[Tuple[int, int, int]]:
    """Back-to-back (start_cs, end_cs, speaker) turns tiling [0, duration] on the 10 ms grid."""
    total = int(round(spec.duration * GRID))
    lo, hi = spec.turn_len_range
    order = list(rng.permutation(spec.n_speakers))
    turns = []
    t = 0
    prev = None
    while t < total:
        length = max(1, int(round(rng.uniform(lo, hi) * GRID)))
        if order:
            spk = int(order.pop(0))
        elif spec.n_speakers == 1:
            spk = 0
        else:
            spk = int(rng.integers(spec.n_speakers - 1))
            if spk >= prev:
                spk += 1
        end = min(total, t + length)
        turns.append((t, end, spk))
        prev = spk
        t = end
    return turns


def gen_recording(spec: SynthSpec):
    """Generate ``(embeddings, reference turns, SAD regions)`` for one recording.

    Speakers take alternating turns with lengths drawn from ``turn_len_range``;
    SAD covers the whole recording; each window's embedding is its midpoint
    owner's anchor plus isotropic Gaussian noise, renormalized.
    """
    rng = np.random.default_rng(spec.seed)
    anchors = sample_anchors(spec.n_speakers, spec.dim, spec.inter_min_angle, rng)
    layout = _layout_turns(spec, rng)
    rec = spec.recording_id
    duration = int(round(spec.duration * GRID)) / GRID
    reference = [Turn(rec, a / GRID, (b - a) / GRID, f"S{spk}") for a, b, spk in layout]
    regions = [SpeechRegion(rec, 0.0, duration)]
    segments = segment_regions(regions, spec.window, spec.shift)

    starts = np.array([a for a, _, _ in layout])
    vectors = np.empty((len(segments), spec.dim))
    for i, (s, e) in enumerate(segments):
        mid_cs = (s + e) / 2.0 * GRID
        owner = layout[int(np.searchsorted(starts, mid_cs, side="right")) - 1][2]
        vectors[i] = _unit(anchors[owner] + spec.intra_noise * rng.standard_normal(spec.dim))
    return SegmentEmbeddings(rec, spec.dim, segments, vectors), reference, regions


def gen_domain(specs: Sequence[SynthSpec], name: str) -> Domain:
    """Build a domain from specs: the first half become dev recordings, the rest eval."""
    if len(specs) < 2:
        raise InvalidInputError("a domain needs at least two specs (dev and eval)")
    n_dev = len(specs) // 2
    dom = Domain(name)
    for i, spec in enumerate(specs):
        rec_id = f"{name}-{i:03d}"
        emb, ref, regions = gen_recording(replace(spec, recording_id=rec_id))
        bundle = RecordingBundle(rec_id, regions, emb, ref)
        (dom.dev if i < n_dev else dom.eval).append(bundle)
    return dom


def write_domain(domain: Domain, out_dir) -> List[str]:
    """Write SAD/embedding/RTTM files under ``out_dir/<name>/`` and return manifest lines.

    Manifest paths are relative to ``out_dir``.
    """
    out = Path(out_dir)
    (out / domain.name).mkdir(parents=True, exist_ok=True)
    lines = []
    for split, bundles in (("dev", domain.dev), ("eval", domain.eval)):
        for b in bundles:
            stem = f"{domain.name}/{b.recording_id}"
            (out / f"{stem}.sad").write_text(emit_sad(b.regions))
            (out / f"{stem}.emb").write_text(write_embeddings(b.embeddings))
            (out / f"{stem}.rttm").write_text(emit_rttm(b.reference))
            lines.append(f"{domain.name} {split} {b.recording_id} {stem}.sad {stem}.emb {stem}.rttm\n")
    return lines


def load_spec_file(path) -> List[Tuple[str, List[SynthSpec]]]:
    """Read a JSON corpus description.

    ``{"seed": 7, "domains": [{"name": "easy", "recordings": [{...SynthSpec fields...}, ...]}]}``.
    A recording may give ``"count": n`` to repeat itself n times; recordings
    without an explicit seed get one derived from the corpus seed.
    """
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    root_seed = int(data.get("seed", 0))
    fields = set(SynthSpec.__dataclass_fields__)
    out = []
    for di, dom in enumerate(data["domains"]):
        specs = []
        for entry in dom["recordings"]:
            entry = dict(entry)
            count = int(entry.pop("count", 1))
            unknown = set(entry) - fields
            if unknown:
                raise InvalidInputError(f"unknown SynthSpec fields: {sorted(unknown)}")
            if "turn_len_range" in entry:
                entry["turn_len_range"] = tuple(entry["turn_len_range"])
            for _ in range(count):
                spec = SynthSpec(**entry)
                if "seed" not in entry:
                    seq = np.random.SeedSequence([root_seed, di, len(specs)])
                    spec = replace(spec, seed=int(seq.generate_state(1)[0]))
                specs.append(spec)
        out.append((dom["name"], specs))
    return out


def synth_corpus(path, out_dir) -> Path:
    """Generate every domain of a spec file and write ``manifest.tsv``. Returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = []
    for name, specs in load_spec_file(path):
        lines.extend(write_domain(gen_domain(specs, name), out))
    manifest = out / "manifest.tsv"
    manifest.write_text("".join(lines))
    return manifest


# --------------------------------------------------------------------------
# Oracles
# --------------------------------------------------------------------------

def oracle_assignment(cost) -> Tuple[List[Tuple[int, int]], float]:
    """Maximum-total injective row/column matching by exhaustive enumeration (<= 6 x 6).

    Returns ``(pairs, total)``; among equal totals the lexicographically first
    enumeration wins, so an all-zero matrix yields the identity prefix.
    """
    rows = [list(map(float, r)) for r in cost]
    n_rows = len(rows)
    n_cols = len(rows[0]) if rows else 0
    if n_rows > 6 or n_cols > 6:
        raise InvalidInputError("oracle_assignment is limited to 6 x 6 matrices")
    if n_rows == 0 or n_cols == 0:
        return [], 0.0
    best_pairs, best_total = None, -math.inf
    if n_rows <= n_cols:
        for perm in itertools.permutations(range(n_cols), n_rows):
            total = 0.0
            for i, j in enumerate(perm):
                total += rows[i][j]
            if total > best_total:
                best_total, best_pairs = total, list(enumerate(perm))
    else:
        for perm in itertools.permutations(range(n_rows), n_cols):
            total = 0.0
            for j, i in enumerate(perm):
                total += rows[i][j]
            if total > best_total:
                best_total, best_pairs = total, sorted((i, j) for j, i in enumerate(perm))
    return best_pairs, best_total


def _set_partitions(n: int, k: int):
    """Restricted growth strings of length n using at most k blocks."""
    labels = [0] * n

    def rec(i, used):
        if i == n:
            yield tuple(labels)
            return
        for lab in range(min(used + 1, k)):
            labels[i] = lab
            yield from rec(i + 1, max(used, lab + 1))

    if n == 0:
        yield ()
        return
    labels[0] = 0
    yield from rec(1, 1)


def oracle_kmeans(points, k: int) -> float:
    """Global minimum k-means inertia by enumerating every partition into <= k parts (N <= 8, k <= 3)."""
    pts = [[float(v) for v in (p if hasattr(p, "__len__") else [p])] for p in points]
    n = len(pts)
    if n > 8 or k > 3 or k < 1:
        raise InvalidInputError("oracle_kmeans is limited to N <= 8 and 1 <= k <= 3")
    dim = len(pts[0]) if pts else 0
    best = math.inf
    for part in _set_partitions(n, k):
        inertia = 0.0
        for block in set(part):
            members = [pts[i] for i in range(n) if part[i] == block]
            centre = [sum(m[d] for m in members) / len(members) for d in range(dim)]
            for m in members:
                inertia += sum((m[d] - centre[d]) ** 2 for d in range(dim))
        best = min(best, inertia)
    return best


def oracle_der_frames(ref: Sequence[Turn], hyp: Sequence[Turn], collar: float = 0.25,
                      frame: float = 0.001) -> DerBreakdown:
    """DER by counting fixed-length frames.

    Boundaries and the collar must be multiples of ``frame``. The collar mask
    covers ``collar`` on each side of every reference boundary; the speaker
    mapping maximizes matched scored frames (exhaustive search up to 6 x 6).
    """
    def fr(t):
        return int(round(t / frame))

    def spans(turns):
        out: Dict[str, List[Tuple[int, int]]] = {}
        for t in turns:
            out.setdefault(t.speaker, []).append((fr(t.onset), fr(t.onset + t.duration)))
        return out

    ref_sp, hyp_sp = spans(ref), spans(hyp)
    c = fr(collar)
    end = 1 + max([b for s in list(ref_sp.values()) + list(hyp_sp.values()) for _, b in s] + [0]) + c
    scored = np.ones(end, dtype=bool)
    for s in ref_sp.values():
        for a, b in s:
            for edge in (a, b):
                scored[max(0, edge - c):edge + c] = False

    def activity(sp):
        act = {}
        for spk, s in sp.items():
            row = np.zeros(end, dtype=bool)
            for a, b in s:
                row[a:b] = True
            act[spk] = row & scored
        return act

    ref_act, hyp_act = activity(ref_sp), activity(hyp_sp)
    ref_names, hyp_names = list(ref_act), list(hyp_act)
    counts = [[int(np.count_nonzero(ref_act[r] & hyp_act[h])) for h in hyp_names] for r in ref_names]
    if len(ref_names) <= 6 and len(hyp_names) <= 6:
        pairs, _ = oracle_assignment(counts)
    else:
        from scipy.optimize import linear_sum_assignment
        rows, cols = linear_sum_assignment(np.array(counts, dtype=float), maximize=True)
        pairs = list(zip(rows.tolist(), cols.tolist()))

    zero = np.zeros(end, dtype=np.int64)
    n_ref = sum((a.astype(np.int64) for a in ref_act.values()), zero)
    n_hyp = sum((a.astype(np.int64) for a in hyp_act.values()), zero)
    correct = sum((int(np.count_nonzero(ref_act[ref_names[i]] & hyp_act[hyp_names[j]])) for i, j in pairs), 0)
    miss = int(np.maximum(0, n_ref - n_hyp).sum())
    fa = int(np.maximum(0, n_hyp - n_ref).sum())
    err = int(np.minimum(n_ref, n_hyp).sum()) - correct
    tot = int(n_ref.sum())
    return DerBreakdown(miss * frame, fa * frame, err * frame, tot * frame)

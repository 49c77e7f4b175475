"""Pruning-parameter sweeps, same-/cross-domain experiments and their TSV reports."""

from __future__ import annotations

import csv
import io
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Sequence, Tuple

from .affinity import cosine_affinity
from .errors import DiarizationError, InvalidInputError, ParseError, SweepError
from .io_formats import SegmentEmbeddings, SpeechRegion, Turn, parse_rttm, parse_sad, read_embeddings
from .pipeline import PipelineConfig, diarize_detailed
from .scoring import DerBreakdown, ScoringConfig, aggregate_der, compute_der, speaker_count_error

log = logging.getLogger(__name__)


@dataclass(eq=False)
class RecordingBundle:
    recording_id: str
    regions: List[SpeechRegion]
    embeddings: SegmentEmbeddings
    reference: List[Turn]

    @property
    def n_speakers(self) -> int:
        return len({t.speaker for t in self.reference})


@dataclass(eq=False)
class Domain:
    name: str
    dev: List[RecordingBundle] = field(default_factory=list)
    eval: List[RecordingBundle] = field(default_factory=list)


@dataclass(eq=False)
class SweepResult:
    grid: List[float]
    ders: List[float]
    best_alpha: float
    best_der: float
    breakdowns: List[DerBreakdown] = field(default_factory=list, repr=False)
    counts: List[List[Tuple[int, int]]] = field(default_factory=list, repr=False)


@dataclass(eq=False)
class CrossDomainReport:
    names: List[str]
    sweeps: List[SweepResult]
    matrix: List[List[DerBreakdown]]  # [tuning][evaluation]
    eval_counts: List[List[Tuple[int, int]]]  # per domain, at its own alpha

    @property
    def alphas(self) -> List[float]:
        return [s.best_alpha for s in self.sweeps]


def alpha_grid(step: float = 0.01) -> List[float]:
    """Alpha values from 0 to 1 inclusive in steps of ``step``."""
    if not (0 < step <= 1):
        raise InvalidInputError(f"grid step must lie in (0, 1], got {step}")
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9:
        n = int(1.0 / step)
    grid = [round(i * step, 10) for i in range(n + 1)]
    if grid[-1] < 1.0:
        grid.append(1.0)
    return grid


def _score_recording(args):
    """Diarize and score one recording at every alpha. Top-level so worker processes can pickle it."""
    bundle, alphas, base_cfg, scoring = args
    raw = cosine_affinity(bundle.embeddings) if len(bundle.embeddings) else None
    out = []
    for alpha in alphas:
        try:
            result = diarize_detailed(bundle.embeddings, replace(base_cfg, alpha=alpha), raw)
            breakdown = compute_der(bundle.reference, result.turns, scoring)
        except DiarizationError as exc:
            raise SweepError(bundle.recording_id, alpha, exc) from exc
        out.append((breakdown, result.n_speakers))
    return out


def _run_grid(bundles, alphas, base_cfg, scoring, jobs):
    """Per-recording results at every alpha, in bundle order whatever the worker count."""
    tasks = [(b, list(alphas), base_cfg, scoring) for b in bundles]
    if jobs is None or jobs <= 1 or len(tasks) <= 1:
        return [_score_recording(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
        return list(pool.map(_score_recording, tasks))


def first_minimum(grid: Sequence[float], ders: Sequence[float]) -> Tuple[float, float]:
    """``(alpha, der)`` at the lowest DER; ties go to the earliest (smallest) alpha."""
    best = min(range(len(grid)), key=lambda i: (ders[i], i))
    return grid[best], ders[best]


def _by_id(bundles):
    return sorted(bundles, key=lambda b: b.recording_id)


def sweep_alpha(dev: Sequence[RecordingBundle], grid: Sequence[float], base_cfg: PipelineConfig = PipelineConfig(),
                scoring: ScoringConfig = ScoringConfig(), jobs: int = 1) -> SweepResult:
    """Aggregate DER of the development set at every alpha; the first minimum wins.

    The cosine affinity of each recording is computed once and reused across
    the grid, since only pruning depends on alpha.
    """
    if not grid:
        raise InvalidInputError("alpha grid is empty")
    if any(not (0.0 <= a <= 1.0) for a in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("alpha grid must be strictly increasing inside [0, 1]")
    if not dev:
        raise InvalidInputError("development set is empty")
    bundles = _by_id(dev)
    per_rec = _run_grid(bundles, grid, base_cfg, scoring, jobs)

    breakdowns, ders, counts = [], [], []
    for gi in range(len(grid)):
        agg = aggregate_der([rec[gi][0] for rec in per_rec])
        breakdowns.append(agg)
        ders.append(agg.der)
        counts.append([(b.n_speakers, rec[gi][1]) for b, rec in zip(bundles, per_rec)])
    best_alpha, best_der = first_minimum(grid, ders)
    return SweepResult(list(grid), ders, best_alpha, best_der, breakdowns, counts)


def evaluate(bundles: Sequence[RecordingBundle], alpha: float, base_cfg: PipelineConfig = PipelineConfig(),
             scoring: ScoringConfig = ScoringConfig(), jobs: int = 1):
    """Aggregate DER and (true, estimated) speaker counts of ``bundles`` at one alpha."""
    ordered = _by_id(bundles)
    per_rec = _run_grid(ordered, [alpha], base_cfg, scoring, jobs)
    agg = aggregate_der([rec[0][0] for rec in per_rec])
    counts = [(b.n_speakers, rec[0][1]) for b, rec in zip(ordered, per_rec)]
    return agg, counts


def cross_domain(domains: Sequence[Domain], grid: Sequence[float], base_cfg: PipelineConfig = PipelineConfig(),
                 scoring: ScoringConfig = ScoringConfig(), jobs: int = 1) -> CrossDomainReport:
    """Tune alpha on each domain's dev set and evaluate it on every domain's eval set."""
    if not domains:
        raise InvalidInputError("need at least one domain")
    names = [d.name for d in domains]
    if len(set(names)) != len(names):
        raise InvalidInputError(f"duplicate domain names: {names}")
    for d in domains:
        if not d.dev or not d.eval:
            raise InvalidInputError(f"domain {d.name!r} needs both dev and eval recordings")

    sweeps = []
    for d in domains:
        log.info("tuning alpha on %s (%d dev recordings)", d.name, len(d.dev))
        sweeps.append(sweep_alpha(d.dev, grid, base_cfg, scoring, jobs))

    # distinct alphas only: domains that agree on alpha share one evaluation pass
    alphas = sorted({s.best_alpha for s in sweeps})
    cells: Dict[Tuple[str, float], Tuple[DerBreakdown, list]] = {}
    for d in domains:
        ordered = _by_id(d.eval)
        per_rec = _run_grid(ordered, alphas, base_cfg, scoring, jobs)
        for ai, alpha in enumerate(alphas):
            agg = aggregate_der([rec[ai][0] for rec in per_rec])
            counts = [(b.n_speakers, rec[ai][1]) for b, rec in zip(ordered, per_rec)]
            cells[(d.name, alpha)] = (agg, counts)

    matrix = [[cells[(e.name, s.best_alpha)][0] for e in domains] for s in sweeps]
    eval_counts = [cells[(d.name, s.best_alpha)][1] for d, s in zip(domains, sweeps)]
    return CrossDomainReport(names, sweeps, matrix, eval_counts)


def curve_report(sweep: SweepResult) -> str:
    """Plot-ready TSV of (alpha, DER%) plus one row marking the minimum."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(["kind", "alpha", "der_percent"])
    for alpha, der in zip(sweep.grid, sweep.ders):
        writer.writerow(["point", f"{alpha:.2f}", f"{100 * der:.4f}"])
    writer.writerow(["minimum", f"{sweep.best_alpha:.2f}", f"{100 * sweep.best_der:.4f}"])
    return buf.getvalue()


def matrix_report(report: CrossDomainReport) -> str:
    """DER% matrix: one row per tuning domain, one column per evaluation domain."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(["tuning\\evaluation"] + report.names + ["alpha"])
    for name, row, sweep in zip(report.names, report.matrix, report.sweeps):
        writer.writerow([name] + [f"{b.der_percent:.2f}" for b in row] + [f"{sweep.best_alpha:.2f}"])
    return buf.getvalue()


def alpha_report(report: CrossDomainReport) -> str:
    """Chosen alpha per domain with its dev DER and dev/eval speaker-count errors."""
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter="\t", lineterminator="\n")
    writer.writerow(["domain", "best_alpha", "dev_der_percent", "dev_count_error", "eval_count_error"])
    for name, sweep, ev in zip(report.names, report.sweeps, report.eval_counts):
        best = sweep.grid.index(sweep.best_alpha)
        writer.writerow([
            name,
            f"{sweep.best_alpha:.2f}",
            f"{100 * sweep.best_der:.4f}",
            f"{speaker_count_error(sweep.counts[best]):.2f}",
            f"{speaker_count_error(ev):.2f}",
        ])
    return buf.getvalue()


def write_reports(report: CrossDomainReport, out_dir) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fname, text in [("matrix.tsv", matrix_report(report)), ("alpha.tsv", alpha_report(report))]:
        (out / fname).write_text(text)
        written.append(out / fname)
    for name, sweep in zip(report.names, report.sweeps):
        path = out / f"curve_{name}.tsv"
        path.write_text(curve_report(sweep))
        written.append(path)
    return written


def _read(path: Path) -> str:
    return path.read_text(encoding="utf-8")


def load_bundle(rec_id: str, sad_path, emb_path, ref_path) -> RecordingBundle:
    regions = [r for r in parse_sad(_read(Path(sad_path))) if r.recording_id == rec_id]
    emb = read_embeddings(_read(Path(emb_path)))
    if emb.recording_id != rec_id:
        raise ParseError(f"embedding file is for {emb.recording_id!r}, manifest says {rec_id!r}", source=emb_path)
    ref = parse_rttm(_read(Path(ref_path))).get(rec_id, [])
    if not ref:
        raise ParseError(f"no reference turns for {rec_id!r}", source=ref_path)
    return RecordingBundle(rec_id, regions, emb, ref)


def load_manifest(path) -> List[Domain]:
    """Read an experiment manifest.

    One recording per line: ``<domain> <dev|eval> <rec_id> <sad> <emb> <ref_rttm>``.
    Relative paths are resolved against the manifest's directory. Domains keep
    their order of first appearance.
    """
    path = Path(path)
    base = path.parent
    domains: Dict[str, Domain] = {}
    for lineno, line in enumerate(_read(path).splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        if len(fields) != 6:
            raise ParseError(f"expected 6 fields, got {len(fields)}", lineno, source=path)
        name, split, rec = fields[:3]
        if split not in ("dev", "eval"):
            raise ParseError(f"split must be 'dev' or 'eval', got {split!r}", lineno, 2, source=path)
        files = [p if os.path.isabs(p) else base / p for p in fields[3:]]
        bundle = load_bundle(rec, *files)
        dom = domains.setdefault(name, Domain(name))
        (dom.dev if split == "dev" else dom.eval).append(bundle)
    return list(domains.values())

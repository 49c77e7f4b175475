"""Command-line entry point: ``specdiar <subcommand> [flags]``.

Machine-readable output (TSV, RTTM) goes to stdout or the named files; logs go
to stderr. Exit codes: 0 success, 1 usage error, 2 missing file or bad data,
3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__
from .errors import DiarizationError, NumericalError, SweepError
from .io_formats import emit_rttm, parse_rttm, parse_sad, read_embeddings
from .kmeans import DEFAULT_RESTARTS
from .pipeline import MIN_SEG, SHIFT, WINDOW, PipelineConfig, check_segments, diarize, segment_regions
from .scoring import ScoringConfig, aggregate_der, breakdown_tsv, compute_der, speaker_count_error
from .spectral import DEFAULT_K_MAX
from .synthetic import synth_corpus
from .tuning import alpha_grid, cross_domain, curve_report, load_manifest, matrix_report, sweep_alpha, write_reports

log = logging.getLogger("specdiar")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERICAL = 3


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; this tool reserves 2 for data errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _read(path) -> str:
    return Path(path).read_text(encoding="utf-8")


def _jobs(value: Optional[int]) -> int:
    if value is not None:
        return value
    env = os.environ.get("DIARIZE_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer DIARIZE_JOBS=%r", env)
    return os.cpu_count() or 1


def _pipeline_cfg(args, alpha: float = 1.0) -> PipelineConfig:
    return PipelineConfig(
        alpha=alpha,
        k_max=args.k_max,
        oracle_k=getattr(args, "oracle_k", None),
        seed=args.seed,
        restarts=args.restarts,
    )


def cmd_segment(args) -> int:
    regions = parse_sad(_read(args.sad))
    lines = []
    for r in regions:
        for onset, offset in segment_regions([r], args.window, args.shift, args.min_seg):
            lines.append(f"{r.recording_id}\t{onset!r}\t{offset!r}\n")
    sys.stdout.write("".join(lines))
    return EXIT_OK


def cmd_diarize(args) -> int:
    emb = read_embeddings(_read(args.emb))
    regions = [r for r in parse_sad(_read(args.sad)) if r.recording_id == emb.recording_id]
    check_segments(emb, regions)
    turns = diarize(emb, _pipeline_cfg(args, args.alpha))
    Path(args.out).write_text(emit_rttm(turns), encoding="utf-8")
    log.info("%s: %d segments, %d speakers -> %s", emb.recording_id, len(emb),
             len({t.speaker for t in turns}), args.out)
    return EXIT_OK


def cmd_score(args) -> int:
    ref = parse_rttm(_read(args.ref))
    hyp = parse_rttm(_read(args.hyp))
    cfg = ScoringConfig(args.collar)
    for rec in sorted(set(hyp) - set(ref)):
        log.warning("hypothesis recording %r has no reference; skipped", rec)
    rows = [(rec, compute_der(ref[rec], hyp.get(rec, []), cfg)) for rec in sorted(ref)]
    if rows:
        rows.append(("ALL", aggregate_der([b for _, b in rows])))
    sys.stdout.write(breakdown_tsv(rows))
    return EXIT_OK


def cmd_tune(args) -> int:
    domains = {d.name: d for d in load_manifest(args.manifest)}
    if args.domain not in domains:
        raise DiarizationError(f"domain {args.domain!r} not in manifest (have {sorted(domains)})")
    res = sweep_alpha(domains[args.domain].dev, alpha_grid(args.grid_step), _pipeline_cfg(args),
                      ScoringConfig(args.collar), _jobs(args.jobs))
    sys.stdout.write(curve_report(res))
    log.info("%s: best alpha %.2f, DER %.2f%%", args.domain, res.best_alpha, 100 * res.best_der)
    return EXIT_OK


def cmd_xdomain(args) -> int:
    domains = load_manifest(args.manifest)
    report = cross_domain(domains, alpha_grid(args.grid_step), _pipeline_cfg(args),
                          ScoringConfig(args.collar), _jobs(args.jobs))
    for path in write_reports(report, args.out_dir):
        log.info("wrote %s", path)
    sys.stdout.write(matrix_report(report))
    return EXIT_OK


def cmd_synth(args) -> int:
    manifest = synth_corpus(args.spec_file, args.out_dir)
    sys.stdout.write(f"{manifest}\n")
    return EXIT_OK


def cmd_count_error(args) -> int:
    ref = parse_rttm(_read(args.ref))
    hyp_dir = Path(args.hyp_dir)
    if not hyp_dir.is_dir():
        raise FileNotFoundError(f"hypothesis directory not found: {hyp_dir}")
    pairs = []
    lines = ["recording\ttrue\testimated\tabs_error\n"]
    for rec in sorted(ref):
        hyp = parse_rttm(_read(hyp_dir / f"{rec}.rttm")).get(rec, [])
        true_n = len({t.speaker for t in ref[rec]})
        est_n = len({t.speaker for t in hyp})
        pairs.append((true_n, est_n))
        lines.append(f"{rec}\t{true_n}\t{est_n}\t{abs(est_n - true_n)}\n")
    lines.append(f"MEAN\t\t\t{speaker_count_error(pairs):.4f}\n")
    sys.stdout.write("".join(lines))
    return EXIT_OK


def _add_pipeline_flags(p, with_oracle=False):
    p.add_argument("--k-max", type=int, default=DEFAULT_K_MAX, help="largest speaker count the eigengap may pick")
    if with_oracle:
        p.add_argument("--oracle-k", type=int, default=None, help="use this speaker count instead of the eigengap")
    p.add_argument("--seed", type=int, default=42, help="k-means seed")
    p.add_argument("--restarts", type=int, default=DEFAULT_RESTARTS, help="k-means restarts")


def _add_sweep_flags(p):
    p.add_argument("--manifest", required=True, help="experiment manifest: domain split rec sad emb rttm per line")
    p.add_argument("--grid-step", type=float, default=0.01, help="alpha grid step over [0, 1]")
    p.add_argument("--collar", type=float, default=0.25, help="scoring collar in seconds")
    p.add_argument("--jobs", type=int, default=None,
                   help="worker processes; unset falls back to $DIARIZE_JOBS, then the CPU count")
    _add_pipeline_flags(p)


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    parser = _Parser(prog="specdiar", description="Spectral-clustering speaker diarization toolkit.",
                     formatter_class=fmt)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging on stderr")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True

    p = sub.add_parser("segment", help="cut SAD regions into embedding windows", formatter_class=fmt)
    p.add_argument("--sad", required=True, help="SAD file: rec onset offset per line")
    p.add_argument("--window", type=float, default=WINDOW, help="window length in seconds")
    p.add_argument("--shift", type=float, default=SHIFT, help="window shift in seconds")
    p.add_argument("--min-seg", type=float, default=MIN_SEG, help="shortest region that still gets a window")
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("diarize", help="diarize one recording's embeddings", formatter_class=fmt)
    p.add_argument("--emb", required=True, help="embedding file")
    p.add_argument("--sad", required=True, help="SAD file covering the embedding segments")
    p.add_argument("--alpha", type=float, required=True, help="pruning parameter in [0, 1]")
    p.add_argument("--out", required=True, help="output RTTM path")
    _add_pipeline_flags(p, with_oracle=True)
    p.set_defaults(func=cmd_diarize)

    p = sub.add_parser("score", help="DER breakdown of a hypothesis RTTM", formatter_class=fmt)
    p.add_argument("--ref", required=True, help="reference RTTM")
    p.add_argument("--hyp", required=True, help="hypothesis RTTM")
    p.add_argument("--collar", type=float, default=0.25, help="collar in seconds around reference boundaries")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("tune", help="sweep alpha on one domain's dev set", formatter_class=fmt)
    p.add_argument("--domain", required=True, help="domain name from the manifest")
    _add_sweep_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("xdomain", help="cross-domain tuning/evaluation matrix", formatter_class=fmt)
    p.add_argument("--out-dir", required=True, help="directory for matrix.tsv, alpha.tsv and curve_*.tsv")
    _add_sweep_flags(p)
    p.set_defaults(func=cmd_xdomain)

    p = sub.add_parser("synth", help="generate a synthetic corpus and manifest", formatter_class=fmt)
    p.add_argument("--spec-file", required=True, help="JSON corpus description")
    p.add_argument("--out-dir", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("count-error", help="speaker-count error of hypothesis RTTMs", formatter_class=fmt)
    p.add_argument("--ref", required=True, help="reference RTTM (any number of recordings)")
    p.add_argument("--hyp-dir", required=True, help="directory holding <recording>.rttm hypotheses")
    p.set_defaults(func=cmd_count_error)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except SweepError as exc:
        log.error("%s", exc)
        return EXIT_NUMERICAL if isinstance(exc.cause, NumericalError) else EXIT_DATA
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (DiarizationError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Readers and writers for RTTM annotations, SAD region lists and segment-embedding files.

All functions work on in-memory text. File handling is left to callers so the
parsers can be exercised directly (and fuzzed) without touching the disk.

Formats
-------
RTTM (one turn per line, 10 space-delimited fields)::

    SPEAKER <rec> 1 <onset> <dur> <NA> <NA> <spk> <NA> <NA>

SAD (one speech region per line)::

    <rec> <onset> <offset>

Embeddings (one recording per file)::

    <rec> <N> <d>
    <onset> <offset> <v1> ... <vd>      # N rows
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from .errors import ParseError

RTTM_FIELDS = 10


@dataclass(frozen=True)
class Turn:
    """One speaker-attributed interval of a recording."""

    recording_id: str
    onset: float
    duration: float
    speaker: str

    def __post_init__(self):
        if not self.recording_id or any(c.isspace() for c in self.recording_id):
            raise ValueError(f"invalid recording id {self.recording_id!r}")
        if not self.speaker or any(c.isspace() for c in self.speaker):
            raise ValueError(f"invalid speaker label {self.speaker!r}")
        if not (math.isfinite(self.onset) and self.onset >= 0):
            raise ValueError(f"onset must be finite and >= 0, got {self.onset}")
        if not (math.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"duration must be finite and > 0, got {self.duration}")

    @property
    def offset(self) -> float:
        return self.onset + self.duration


@dataclass(frozen=True)
class SpeechRegion:
    recording_id: str
    onset: float
    offset: float

    def __post_init__(self):
        if not (self.offset > self.onset):
            raise ValueError(f"region offset {self.offset} <= onset {self.onset}")


@dataclass(eq=False)
class SegmentEmbeddings:
    """Per-segment speaker embeddings of one recording.

    ``vectors`` is an ``(N, dim)`` float array; ``segments`` holds the matching
    ``(onset, offset)`` extents, sorted by onset.
    """

    recording_id: str
    dim: int
    segments: List[Tuple[float, float]] = field(default_factory=list)
    vectors: np.ndarray = None

    def __post_init__(self):
        if self.vectors is None:
            self.vectors = np.zeros((0, self.dim))
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[1] != self.dim:
            raise ValueError(f"vectors must have shape (N, {self.dim}), got {self.vectors.shape}")
        if len(self.segments) != self.vectors.shape[0]:
            raise ValueError(
                f"{len(self.segments)} segments but {self.vectors.shape[0]} vectors"
            )
        self.segments = [(float(a), float(b)) for a, b in self.segments]

    def __len__(self):
        return len(self.segments)

    def __eq__(self, other):
        if not isinstance(other, SegmentEmbeddings):
            return NotImplemented
        return (
            self.recording_id == other.recording_id
            and self.dim == other.dim
            and self.segments == other.segments
            and np.array_equal(self.vectors, other.vectors)
        )


def _float(token: str, line: int, column: int) -> float:
    try:
        value = float(token)
    except ValueError:
        raise ParseError(f"not a number: {token!r}", line, column) from None
    if not math.isfinite(value):
        raise ParseError(f"non-finite value: {token!r}", line, column)
    return value


def _int(token: str, line: int, column: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"not an integer: {token!r}", line, column) from None


def parse_rttm(text: str) -> Dict[str, List[Turn]]:
    """Parse RTTM text into turns grouped by recording id.

    Only ``SPEAKER`` lines produce turns; other line types (``SPKR-INFO``,
    ``LEXEME``, ...) are skipped. Blank lines and ``#`` comments are ignored.
    Groups appear in order of first occurrence, turns in file order.
    """
    turns: Dict[str, List[Turn]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        fields = raw.split()
        if not fields or fields[0].startswith("#"):
            continue
        if fields[0] != "SPEAKER":
            continue
        if len(fields) < 9:
            raise ParseError(f"expected at least 9 fields, got {len(fields)}", lineno)
        onset = _float(fields[3], lineno, 4)
        duration = _float(fields[4], lineno, 5)
        if onset < 0:
            raise ParseError(f"negative onset {onset}", lineno, 4)
        if duration <= 0:
            raise ParseError(f"non-positive duration {duration}", lineno, 5)
        rec, speaker = fields[1], fields[7]
        turns.setdefault(rec, []).append(Turn(rec, onset, duration, speaker))
    return turns


def emit_rttm(turns: Iterable[Turn]) -> str:
    """Serialize turns to RTTM, sorted by (recording, onset, speaker), 1 ms precision."""
    ordered = sorted(turns, key=lambda t: (t.recording_id, t.onset, t.speaker))
    lines = [
        f"SPEAKER {t.recording_id} 1 {t.onset:.3f} {t.duration:.3f} <NA> <NA> {t.speaker} <NA> <NA>\n"
        for t in ordered
    ]
    return "".join(lines)


def parse_sad(text: str) -> List[SpeechRegion]:
    """Parse SAD text; per recording, regions are sorted and overlapping/abutting ones merged.

    Recordings keep their order of first appearance.
    """
    raw: Dict[str, List[Tuple[float, float]]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        if len(fields) != 3:
            raise ParseError(f"expected 3 fields, got {len(fields)}", lineno)
        onset = _float(fields[1], lineno, 2)
        offset = _float(fields[2], lineno, 3)
        if offset <= onset:
            raise ParseError(f"offset {offset} <= onset {onset}", lineno, 3)
        raw.setdefault(fields[0], []).append((onset, offset))

    regions: List[SpeechRegion] = []
    for rec, spans in raw.items():
        spans.sort()
        merged = [list(spans[0])]
        for onset, offset in spans[1:]:
            if onset <= merged[-1][1]:
                merged[-1][1] = max(merged[-1][1], offset)
            else:
                merged.append([onset, offset])
        regions.extend(SpeechRegion(rec, a, b) for a, b in merged)
    return regions


def emit_sad(regions: Iterable[SpeechRegion]) -> str:
    return "".join(f"{r.recording_id} {r.onset!r} {r.offset!r}\n" for r in regions)


def read_embeddings(text: str) -> SegmentEmbeddings:
    """Parse a segment-embedding file. Vectors are returned as stored (not normalized)."""
    lines = [(i, line.split()) for i, line in enumerate(text.splitlines(), start=1)]
    lines = [(i, f) for i, f in lines if f]
    if not lines:
        raise ParseError("missing header line", 1)
    hline, header = lines[0]
    if len(header) != 3:
        raise ParseError(f"header must be '<rec> <N> <d>', got {len(header)} fields", hline)
    rec = header[0]
    n = _int(header[1], hline, 2)
    dim = _int(header[2], hline, 3)
    if n < 0:
        raise ParseError(f"negative segment count {n}", hline, 2)
    if dim <= 0:
        raise ParseError(f"dimension must be positive, got {dim}", hline, 3)
    rows = lines[1:]
    if len(rows) != n:
        where = rows[n][0] if len(rows) > n else (rows[-1][0] if rows else hline)
        raise ParseError(f"header declares {n} rows, found {len(rows)}", where)

    segments: List[Tuple[float, float]] = []
    vectors = np.empty((n, dim), dtype=np.float64)
    for r, (lineno, fields) in enumerate(rows):
        if len(fields) != dim + 2:
            raise ParseError(f"expected {dim + 2} columns, got {len(fields)}", lineno)
        values = [_float(tok, lineno, c) for c, tok in enumerate(fields, start=1)]
        onset, offset = values[0], values[1]
        if offset <= onset:
            raise ParseError(f"segment offset {offset} <= onset {onset}", lineno, 2)
        if segments and onset < segments[-1][0]:
            raise ParseError("segments not sorted by onset", lineno, 1)
        vec = values[2:]
        if not any(v != 0.0 for v in vec):
            raise ParseError("zero-norm embedding vector", lineno, 3)
        segments.append((onset, offset))
        vectors[r] = vec
    return SegmentEmbeddings(rec, dim, segments, vectors)


def write_embeddings(e: SegmentEmbeddings) -> str:
    """Serialize embeddings; floats use ``repr`` so the round-trip is exact."""
    out = [f"{e.recording_id} {len(e.segments)} {e.dim}\n"]
    for (onset, offset), vec in zip(e.segments, e.vectors):
        values = " ".join(repr(float(v)) for v in vec)
        out.append(f"{onset!r} {offset!r} {values}\n")
    return "".join(out)


def speakers_by_recording(turns: Sequence[Turn]) -> Dict[str, set]:
    out: Dict[str, set] = {}
    for t in turns:
        out.setdefault(t.recording_id, set()).add(t.speaker)
    return out

"""Spectral-clustering speaker diarization with DER scoring and a pruning-parameter tuning harness."""

from .affinity import AffinityMatrix, PruningConfig, cosine_affinity, prune_rows, symmetrize
from .errors import (
    DiarizationError,
    InfeasibleSpecError,
    InvalidInputError,
    NumericalError,
    ParseError,
    SweepError,
    UndefinedDerError,
)
from .io_formats import (
    SegmentEmbeddings,
    SpeechRegion,
    Turn,
    emit_rttm,
    parse_rttm,
    parse_sad,
    read_embeddings,
    write_embeddings,
)
from .kmeans import ClusterResult, kmeans
from .pipeline import PipelineConfig, diarize, labels_to_turns, segment_regions
from .scoring import (
    DerBreakdown,
    ScoringConfig,
    aggregate_der,
    compute_der,
    optimal_mapping,
    scored_timeline,
    speaker_count_error,
)
from .spectral import eig_sym, estimate_k, laplacian, spectral_embed

__all__ = [
    "AffinityMatrix",
    "aggregate_der",
    "ClusterResult",
    "compute_der",
    "cosine_affinity",
    "DerBreakdown",
    "DiarizationError",
    "diarize",
    "eig_sym",
    "emit_rttm",
    "estimate_k",
    "InfeasibleSpecError",
    "InvalidInputError",
    "kmeans",
    "labels_to_turns",
    "laplacian",
    "NumericalError",
    "optimal_mapping",
    "parse_rttm",
    "parse_sad",
    "ParseError",
    "PipelineConfig",
    "prune_rows",
    "PruningConfig",
    "read_embeddings",
    "scored_timeline",
    "ScoringConfig",
    "segment_regions",
    "SegmentEmbeddings",
    "speaker_count_error",
    "spectral_embed",
    "SpeechRegion",
    "SweepError",
    "symmetrize",
    "Turn",
    "UndefinedDerError",
    "write_embeddings",
]

__version__ = "0.1.0"

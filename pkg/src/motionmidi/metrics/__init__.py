from .beats import (
    DEFAULT_TOLERANCE,
    MetricError,
    bas,
    bcs,
    bhs,
    detect_beats,
    match_beats,
    ticks_to_seconds,
)
from .quality import (
    entropy,
    groove_similarity,
    groove_vectors,
    gs,
    phe,
    pitch_class_histograms,
)
from .report import CSV_COLUMNS, MetricReport, corpus_mean, evaluate_pair, read_csv, write_csv

__all__ = [
    "CSV_COLUMNS",
    "DEFAULT_TOLERANCE",
    "MetricError",
    "MetricReport",
    "bas",
    "bcs",
    "bhs",
    "corpus_mean",
    "detect_beats",
    "entropy",
    "evaluate_pair",
    "groove_similarity",
    "groove_vectors",
    "gs",
    "match_beats",
    "phe",
    "pitch_class_histograms",
    "read_csv",
    "ticks_to_seconds",
    "write_csv",
]

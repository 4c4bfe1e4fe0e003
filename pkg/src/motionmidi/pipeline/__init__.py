from .corpus import (
    ClipRecord,
    CorpusError,
    CorpusManifest,
    load_manifest,
    save_manifest,
    sliding_window,
    split,
)
from .synthetic import SyntheticSpec, make_synthetic, synth_notes, synth_skeleton
from .config import ConfigError, load_config, merged

__all__ = [
    "ClipRecord",
    "ConfigError",
    "CorpusError",
    "CorpusManifest",
    "load_config",
    "load_manifest",
    "make_synthetic",
    "merged",
    "save_manifest",
    "sliding_window",
    "split",
    "synth_notes",
    "synth_skeleton",
    "SyntheticSpec",
]

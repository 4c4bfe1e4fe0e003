from .masking import CompletionBatch, MaskedBatch, MaskingError, measure_index, measure_mask
from .model import (
    BertConfig,
    bert_forward,
    init_bert,
    pad_batch,
    train_step_bert,
    weighted_loss,
)
from .complete import (
    CompletionError,
    Scaffold,
    TrackPlan,
    build_completion,
    complete_tracks,
    extract_track,
    non_drum_tracks,
    split_measures,
    track_completion_example,
)

__all__ = [
    "BertConfig",
    "CompletionBatch",
    "CompletionError",
    "MaskedBatch",
    "MaskingError",
    "Scaffold",
    "TrackPlan",
    "bert_forward",
    "build_completion",
    "complete_tracks",
    "extract_track",
    "init_bert",
    "measure_index",
    "measure_mask",
    "non_drum_tracks",
    "pad_batch",
    "split_measures",
    "track_completion_example",
    "train_step_bert",
    "weighted_loss",
]

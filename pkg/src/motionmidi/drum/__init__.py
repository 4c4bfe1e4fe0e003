from .model import (
    DrumConfig,
    SequenceTooLong,
    drum_forward,
    drum_loss,
    encode_condition,
    field_weights,
    init_drum_model,
    masked_cross_entropy,
    sequence_ids,
    teacher_forcing_batch,
    train_step,
    vgm,
    vgm_weights,
)
from .generate import GenerationError, Sampler, generate

__all__ = [
    "DrumConfig",
    "GenerationError",
    "Sampler",
    "SequenceTooLong",
    "drum_forward",
    "drum_loss",
    "encode_condition",
    "field_weights",
    "generate",
    "init_drum_model",
    "masked_cross_entropy",
    "sequence_ids",
    "teacher_forcing_batch",
    "train_step",
    "vgm",
    "vgm_weights",
]

from .skeleton import (
    FPS,
    MotionGraph,
    SkeletonError,
    SkeletonSequence,
    affine_transform,
    augment_affine,
    chain_graph,
    load_clip,
    sample_affine,
    save_clip,
)
from .networks import (
    STYLE_EMBED_DIM,
    EncoderConfig,
    beat_head,
    beat_loss,
    beats_from_logits,
    fuse,
    init_beat_head,
    init_fuse,
    init_stgcn,
    init_style,
    spatial_conv,
    stgcn_block,
    stgcn_forward,
    style_forward,
    style_loss,
    temporal_conv,
)

__all__ = [
    "EncoderConfig",
    "FPS",
    "MotionGraph",
    "STYLE_EMBED_DIM",
    "SkeletonError",
    "SkeletonSequence",
    "affine_transform",
    "augment_affine",
    "beat_head",
    "beat_loss",
    "beats_from_logits",
    "chain_graph",
    "fuse",
    "init_beat_head",
    "init_fuse",
    "init_stgcn",
    "init_style",
    "load_clip",
    "sample_affine",
    "save_clip",
    "spatial_conv",
    "stgcn_block",
    "stgcn_forward",
    "style_forward",
    "style_loss",
    "temporal_conv",
]

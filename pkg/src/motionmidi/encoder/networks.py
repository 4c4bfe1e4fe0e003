"""Skeleton encoders: movement branch, beat head, style branch, fusion.

The movement branch stacks residual spatio-temporal graph blocks (spatial
aggregation over the joint graph, then a temporal convolution), followed by
a projection block that sets the feature width. The beat head reads those
features through a small self-attention encoder and classifies every frame
as beat/non-beat. The style branch pools a four-block graph stack through
two gated recurrent layers into a 32-dim embedding plus genre logits. The
fusion layer broadcasts the per-frame beat bit, appends the style vector
and maps the result to the conditioning width.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..nn import (
    ParamStore,
    Tensor,
    add,
    gather_rows,
    log_softmax,
    matmul,
    mul,
    pad_axis,
    relu,
    reshape,
    take,
    tmean,
    transpose,
    tsum,
)
from ..nn.layers import (
    gru,
    init_gru,
    init_linear,
    init_norm,
    init_relative_bias,
    init_transformer_layer,
    linear,
    norm,
    relative_bias,
    transformer_layer,
)
from .skeleton import MotionGraph

STYLE_EMBED_DIM = 32


@dataclass(frozen=True)
class EncoderConfig:
    stgcn_channels: tuple = (64, 64, 64, 128, 128, 128, 256, 256, 256)
    feature_dim: int = 512
    temporal_kernel: int = 9
    beat_layers: int = 2
    beat_heads: int = 8
    beat_dim: int = 64
    beat_ff: int = 128
    beat_rel_clip: int = 64
    style_channels: tuple = (64, 64, 128, 128)
    style_gru_hidden: int = 64
    n_genres: int = 6
    d_model: int = 512

    @staticmethod
    def desk(d_model: int = 64, n_genres: int = 2) -> "EncoderConfig":
        """Laptop-scale configuration used by the synthetic-corpus suites."""
        return EncoderConfig(
            stgcn_channels=(8, 16),
            feature_dim=32,
            beat_layers=1,
            beat_heads=2,
            beat_dim=32,
            beat_ff=64,
            style_channels=(8, 8, 16, 16),
            style_gru_hidden=16,
            n_genres=n_genres,
            d_model=d_model,
        )

    def to_json(self) -> dict:
        return {
            "stgcn_channels": list(self.stgcn_channels),
            "feature_dim": self.feature_dim,
            "temporal_kernel": self.temporal_kernel,
            "beat_layers": self.beat_layers,
            "beat_heads": self.beat_heads,
            "beat_dim": self.beat_dim,
            "beat_ff": self.beat_ff,
            "beat_rel_clip": self.beat_rel_clip,
            "style_channels": list(self.style_channels),
            "style_gru_hidden": self.style_gru_hidden,
            "n_genres": self.n_genres,
            "d_model": self.d_model,
        }

    @classmethod
    def from_json(cls, blob: dict) -> "EncoderConfig":
        blob = dict(blob)
        blob["stgcn_channels"] = tuple(blob["stgcn_channels"])
        blob["style_channels"] = tuple(blob["style_channels"])
        return cls(**blob)


def spatial_conv(store: ParamStore, name: str, x: Tensor, adjacency: np.ndarray) -> Tensor:
    """Aggregate each joint over its normalized neighborhood, then mix channels.

    Uni-labeling partition: one shared weight matrix for the whole
    neighborhood. x is (B, T, V, C).
    """
    agg = matmul(Tensor(adjacency), x)
    return linear(store, name, agg)


def temporal_conv(store: ParamStore, name: str, x: Tensor, kernel: int) -> Tensor:
    """Per-joint temporal convolution, same-padded so T is preserved."""
    if kernel == 1:
        return linear(store, name, x)
    b, t, v, c = x.shape
    half = kernel // 2
    padded = pad_axis(x, 1, half, half)
    moved = transpose(padded, (1, 0, 2, 3))  # (T+K-1, B, V, C)
    idx = np.arange(t)[:, None] + np.arange(kernel)[None, :]
    windows = take(moved, idx)  # (T, K, B, V, C)
    windows = transpose(windows, (2, 0, 3, 1, 4))  # (B, T, V, K, C)
    windows = reshape(windows, (b, t, v, kernel * c))
    return linear(store, name, windows)


def init_stgcn_block(
    store: ParamStore, gen, name: str, c_in: int, c_out: int, kernel: int
):
    init_linear(store, gen, f"{name}.spatial", c_in, c_out)
    init_norm(store, f"{name}.ln1", c_out)
    init_linear(store, gen, f"{name}.temporal", kernel * c_out, c_out)
    init_norm(store, f"{name}.ln2", c_out)
    if c_in != c_out:
        init_linear(store, gen, f"{name}.res", c_in, c_out, bias=False)


def stgcn_block(
    store: ParamStore, name: str, x: Tensor, adjacency: np.ndarray, kernel: int
) -> Tensor:
    h = relu(norm(store, f"{name}.ln1", spatial_conv(store, f"{name}.spatial", x, adjacency)))
    h = norm(store, f"{name}.ln2", temporal_conv(store, f"{name}.temporal", h, kernel))
    res = linear(store, f"{name}.res", x) if f"{name}.res.w" in store else x
    return relu(add(h, res))


def init_stgcn(store: ParamStore, gen, cfg: EncoderConfig, prefix: str = "stgcn"):
    c_in = 3
    for i, c_out in enumerate(cfg.stgcn_channels):
        init_stgcn_block(store, gen, f"{prefix}.block{i}", c_in, c_out, cfg.temporal_kernel)
        c_in = c_out
    init_stgcn_block(store, gen, f"{prefix}.proj", c_in, cfg.feature_dim, 1)


def stgcn_forward(
    store: ParamStore,
    x: Tensor | np.ndarray,
    graph: MotionGraph,
    cfg: EncoderConfig,
    prefix: str = "stgcn",
) -> Tensor:
    """(B, T, V, 3) joint coordinates -> (B, T, F) movement features."""
    if not isinstance(x, Tensor):
        x = Tensor(x)
    if x.shape[2] != graph.n_joints:
        raise ValueError(f"clip has {x.shape[2]} joints, graph has {graph.n_joints}")
    adjacency = graph.normalized_adjacency()
    h = x
    for i in range(len(cfg.stgcn_channels)):
        h = stgcn_block(store, f"{prefix}.block{i}", h, adjacency, cfg.temporal_kernel)
    h = stgcn_block(store, f"{prefix}.proj", h, adjacency, 1)
    return tmean(h, axis=2)


def init_beat_head(store: ParamStore, gen, cfg: EncoderConfig, prefix: str = "beat"):
    init_linear(store, gen, f"{prefix}.in", cfg.feature_dim, cfg.beat_dim)
    for i in range(cfg.beat_layers):
        init_transformer_layer(
            store, gen, f"{prefix}.layer{i}", cfg.beat_dim, cfg.beat_heads, cfg.beat_ff
        )
        init_relative_bias(
            store, f"{prefix}.layer{i}.rel", cfg.beat_heads, cfg.beat_rel_clip, causal=False
        )
    init_norm(store, f"{prefix}.ln_out", cfg.beat_dim)
    init_linear(store, gen, f"{prefix}.head", cfg.beat_dim, 2)


def beat_head(
    store: ParamStore, zm: Tensor, cfg: EncoderConfig, prefix: str = "beat"
) -> Tensor:
    """(B, T, F) movement features -> (B, T, 2) beat/non-beat logits."""
    t = zm.shape[1]
    frames = np.arange(t)
    h = linear(store, f"{prefix}.in", zm)
    for i in range(cfg.beat_layers):
        bias = relative_bias(
            store, f"{prefix}.layer{i}.rel", frames, frames, cfg.beat_rel_clip, causal=False
        )
        h = transformer_layer(store, f"{prefix}.layer{i}", h, cfg.beat_heads, self_bias=bias)
    return linear(store, f"{prefix}.head", norm(store, f"{prefix}.ln_out", h))


def beats_from_logits(logits: Tensor | np.ndarray) -> np.ndarray:
    """Binary beat sequence: beat wherever the beat logit wins."""
    data = logits.data if isinstance(logits, Tensor) else np.asarray(logits)
    return (data[..., 1] > data[..., 0]).astype(np.float64)


def beat_loss(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Class-weighted cross-entropy over frames; weights balance beat scarcity."""
    targets = np.asarray(targets).astype(np.int64).reshape(-1)
    flat = reshape(logits, (targets.size, 2))
    n_beat = max(int(targets.sum()), 1)
    n_rest = max(targets.size - int(targets.sum()), 1)
    weights = np.where(targets == 1, targets.size / (2.0 * n_beat), targets.size / (2.0 * n_rest))
    picked = gather_rows(log_softmax(flat, axis=-1), targets)
    return mul(tsum(mul(picked, -weights)), 1.0 / targets.size)


def init_style(store: ParamStore, gen, cfg: EncoderConfig, prefix: str = "style"):
    c_in = 3
    for i, c_out in enumerate(cfg.style_channels):
        init_stgcn_block(store, gen, f"{prefix}.block{i}", c_in, c_out, cfg.temporal_kernel)
        c_in = c_out
    init_gru(store, gen, f"{prefix}.gru0", c_in, cfg.style_gru_hidden)
    init_gru(store, gen, f"{prefix}.gru1", cfg.style_gru_hidden, cfg.style_gru_hidden)
    init_linear(store, gen, f"{prefix}.embed", cfg.style_gru_hidden, STYLE_EMBED_DIM)
    init_linear(store, gen, f"{prefix}.cls0", STYLE_EMBED_DIM, STYLE_EMBED_DIM)
    init_linear(store, gen, f"{prefix}.cls1", STYLE_EMBED_DIM, cfg.n_genres)


def style_forward(
    store: ParamStore,
    x: Tensor | np.ndarray,
    graph: MotionGraph,
    cfg: EncoderConfig,
    prefix: str = "style",
) -> tuple[Tensor, Tensor]:
    """(B, T, V, 3) -> 32-dim style embedding (B, 32) and genre logits.

    Blocks after the first subsample time by two, so the recurrent pooling
    sees a shorter sequence; the embedding is taken before the classifier.
    """
    if not isinstance(x, Tensor):
        x = Tensor(x)
    adjacency = graph.normalized_adjacency()
    h = x
    for i in range(len(cfg.style_channels)):
        h = stgcn_block(store, f"{prefix}.block{i}", h, adjacency, cfg.temporal_kernel)
        if i > 0 and h.shape[1] > 2:
            h = h[:, ::2]
    h = tmean(h, axis=2)  # (B, T', C)
    h, _ = gru(store, f"{prefix}.gru0", h, cfg.style_gru_hidden)
    _, final = gru(store, f"{prefix}.gru1", h, cfg.style_gru_hidden)
    embedding = linear(store, f"{prefix}.embed", final)
    logits = linear(store, f"{prefix}.cls1", relu(linear(store, f"{prefix}.cls0", embedding)))
    return embedding, logits


def style_loss(logits: Tensor, labels: np.ndarray) -> Tensor:
    labels = np.asarray(labels).astype(np.int64)
    picked = gather_rows(log_softmax(logits, axis=-1), labels)
    return mul(tmean(picked), -1.0)


def init_fuse(store: ParamStore, gen, cfg: EncoderConfig, prefix: str = "fuse"):
    init_linear(store, gen, f"{prefix}.proj", 1 + STYLE_EMBED_DIM, cfg.d_model)


def fuse(
    store: ParamStore, zb: Tensor | np.ndarray, zs: Tensor, prefix: str = "fuse"
) -> Tensor:
    """Per frame concat [beat bit, style vector], then a learned map to d_model.

    zb: (B, T) binary beat sequence; zs: (B, 32) style embedding.
    Returns (B, T, d_model).
    """
    if not isinstance(zb, Tensor):
        zb = Tensor(zb)
    b, t = zb.shape
    zb3 = reshape(zb, (b, t, 1))
    zs3 = add(Tensor(np.zeros((b, t, STYLE_EMBED_DIM))), reshape(zs, (b, 1, STYLE_EMBED_DIM)))
    from ..nn import concat

    return linear(store, f"{prefix}.proj", concat([zb3, zs3], axis=2))

"""Conditional autoregressive drum-track decoder.

Each decoder block pairs causal self-attention over the drum tokens with a
cross-attention stage whose keys and values are the dance conditioning
sequence: per head softmax(D Wq (Z Wk)^T / sqrt(d_head)) (Z Wv), heads
concatenated and linearly mixed. The conditioning itself runs through a
small self-attention encoder (with fixed sinusoidal positions) before it is
used as memory. Token order is encoded only through pos-group distances,
so tokens inside one chord are interchangeable.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..midi.vocab import FIELDS, PAD, Vocab
from ..midi.tokens import TokenQuad
from ..nn import ParamStore, Tensor, add, embed, gather_rows, log_softmax, mul, reshape, tsum
from ..nn.layers import (
    causal_mask,
    init_embedding,
    init_linear,
    init_norm,
    init_relative_bias,
    init_transformer_layer,
    linear,
    norm,
    relative_bias,
    sinusoidal_positions,
    transformer_layer,
)


@dataclass(frozen=True)
class DrumConfig:
    d_model: int = 512
    n_heads: int = 8
    n_blocks: int = 6
    d_ff: int = 1024
    enc_blocks: int = 6
    rel_clip: int = 128
    max_len: int = 2048

    def __post_init__(self):
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model {self.d_model} not divisible by {self.n_heads} heads")

    @staticmethod
    def desk(d_model: int = 64) -> "DrumConfig":
        return DrumConfig(
            d_model=d_model, n_heads=4, n_blocks=2, d_ff=128, enc_blocks=1, max_len=512
        )

    def to_json(self) -> dict:
        return {
            "d_model": self.d_model,
            "n_heads": self.n_heads,
            "n_blocks": self.n_blocks,
            "d_ff": self.d_ff,
            "enc_blocks": self.enc_blocks,
            "rel_clip": self.rel_clip,
            "max_len": self.max_len,
        }

    @classmethod
    def from_json(cls, blob: dict) -> "DrumConfig":
        return cls(**blob)


class SequenceTooLong(ValueError):
    pass


def field_weights(vocab: Vocab) -> dict[str, float]:
    """Loss weights proportional to each field's vocabulary size."""
    sizes = vocab.sizes
    total = sum(sizes.values())
    return {f: sizes[f] / total for f in FIELDS}


def sequence_ids(
    vocab: Vocab, tokens: list[TokenQuad], bos: bool = False, eos: bool = False
) -> tuple[dict[str, np.ndarray], np.ndarray]:
    """Token list -> per-field id arrays plus the pos-group vector."""
    from ..midi.vocab import BOS_ID, EOS_ID

    ids = {f: [] for f in FIELDS}
    groups = []
    if bos:
        for f in FIELDS:
            ids[f].append(BOS_ID if f == "event" else PAD)
        groups.append(0)
    for tok in tokens:
        event, dur, track, instr = vocab.encode_token(tok)
        ids["event"].append(event)
        ids["duration"].append(dur)
        ids["track"].append(track)
        ids["instrument"].append(instr)
        groups.append(tok.pos_group)
    if eos:
        for f in FIELDS:
            ids[f].append(EOS_ID if f == "event" else PAD)
        groups.append(groups[-1] if groups else 0)
    return (
        {f: np.asarray(v, dtype=np.int64) for f, v in ids.items()},
        np.asarray(groups, dtype=np.int64),
    )


def init_drum_model(store: ParamStore, gen, cfg: DrumConfig, vocab: Vocab, prefix: str = "drum"):
    sizes = vocab.sizes
    for f in FIELDS:
        init_embedding(store, gen, f"{prefix}.embed.{f}", sizes[f], cfg.d_model)
    for i in range(cfg.enc_blocks):
        init_transformer_layer(
            store, gen, f"{prefix}.enc{i}", cfg.d_model, cfg.n_heads, cfg.d_ff
        )
    for i in range(cfg.n_blocks):
        init_transformer_layer(
            store, gen, f"{prefix}.dec{i}", cfg.d_model, cfg.n_heads, cfg.d_ff, cross=True
        )
        init_relative_bias(store, f"{prefix}.dec{i}.rel", cfg.n_heads, cfg.rel_clip, causal=True)
    init_norm(store, f"{prefix}.ln_out", cfg.d_model)
    for f in FIELDS:
        init_linear(store, gen, f"{prefix}.head.{f}", cfg.d_model, sizes[f])


def encode_condition(
    store: ParamStore, cfg: DrumConfig, z: Tensor | np.ndarray, prefix: str = "drum"
) -> Tensor:
    """Self-attention encoding of the conditioning sequence (B, T, d)."""
    if not isinstance(z, Tensor):
        z = Tensor(z)
    t, d = z.shape[-2], z.shape[-1]
    h = add(z, Tensor(sinusoidal_positions(t, d)))
    for i in range(cfg.enc_blocks):
        h = transformer_layer(store, f"{prefix}.enc{i}", h, cfg.n_heads)
    return h


def vgm(
    store: ParamStore,
    name: str,
    d_tokens: Tensor,
    z: Tensor,
    n_heads: int,
) -> Tensor:
    """Cross-attention with drum tokens as queries, conditioning as keys/values.

    No mask on the conditioning axis: every drum position may attend to all
    frames.
    """
    from ..nn.layers import multihead_attention

    return multihead_attention(store, name, d_tokens, z, n_heads)


def vgm_weights(
    store: ParamStore, name: str, d_tokens: np.ndarray, z: np.ndarray, n_heads: int
) -> np.ndarray:
    """Attention matrix of the cross stage (B, h, n, T), for inspection."""
    b, n, dm = d_tokens.shape
    t = z.shape[1]
    dh = dm // n_heads

    def split(x, length):
        return x.reshape(b, length, n_heads, dh).transpose(0, 2, 1, 3)

    q = split(d_tokens @ store[f"{name}.wq"].data, n)
    k = split(z @ store[f"{name}.wk"].data, t)
    scores = q @ k.transpose(0, 1, 3, 2) / np.sqrt(dh)
    e = np.exp(scores - scores.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def pitch_event_table(vocab: Vocab) -> np.ndarray:
    """Boolean table over event ids: True where the id names a pitch."""
    table = np.zeros(vocab.sizes["event"], dtype=bool)
    for event, idx in vocab.tables["event"].items():
        if event.startswith("PITCH_"):
            table[idx] = True
    return table


def group_causal_mask(pos_groups: np.ndarray, pitch_flags: np.ndarray) -> np.ndarray:
    """Causality at pos-group granularity.

    A token attends strictly earlier groups, itself, and the structural
    tokens (measure/position/chord) that opened its own group. Chord
    siblings never see each other, which is exactly what makes their order
    irrelevant at every block depth; groups are non-decreasing, so every
    attended key is at or before the query index.
    """
    g = np.asarray(pos_groups)
    flags = np.asarray(pitch_flags, dtype=bool)
    n = g.shape[-1]
    idx = np.arange(n)
    if g.ndim == 1:
        earlier_group = g[None, :] < g[:, None]
        earlier_structural = (~flags)[None, :] & (idx[None, :] < idx[:, None])
        return earlier_group | earlier_structural | np.eye(n, dtype=bool)
    earlier_group = g[:, None, :] < g[:, :, None]
    earlier_structural = (~flags)[:, None, :] & (idx[None, None, :] < idx[None, :, None])
    return earlier_group | earlier_structural | np.eye(n, dtype=bool)[None]


def drum_forward(
    store: ParamStore,
    cfg: DrumConfig,
    ids: dict[str, np.ndarray],
    pos_groups: np.ndarray,
    memory: Tensor,
    vocab: Vocab | None = None,
    prefix: str = "drum",
) -> dict[str, Tensor]:
    """Teacher-forcing forward: per-field next-token logits at every position.

    ids: field -> (B, n) int arrays; pos_groups: (B, n); memory: encoded
    conditioning (B, T, d). Self-attention is group-causal when a vocab is
    given (so chord-internal order cannot matter), plain index-causal
    otherwise; the cross stage sees every frame.
    """
    n = ids["event"].shape[-1]
    if n > cfg.max_len:
        raise SequenceTooLong(f"sequence length {n} exceeds max_len {cfg.max_len}")
    x = None
    for f in FIELDS:
        e = embed(store[f"{prefix}.embed.{f}"], ids[f])
        x = e if x is None else add(x, e)
    if vocab is not None:
        flags = pitch_event_table(vocab)[ids["event"]]
        mask = group_causal_mask(pos_groups, flags)
        if mask.ndim == 3:
            mask = mask[:, None]  # broadcast over heads
    else:
        mask = causal_mask(n)
    for i in range(cfg.n_blocks):
        bias = relative_bias(
            store, f"{prefix}.dec{i}.rel", pos_groups, pos_groups, cfg.rel_clip, causal=True
        )
        x = transformer_layer(
            store,
            f"{prefix}.dec{i}",
            x,
            cfg.n_heads,
            self_mask=mask,
            self_bias=bias,
            memory=memory,
        )
    x = norm(store, f"{prefix}.ln_out", x)
    return {f: linear(store, f"{prefix}.head.{f}", x) for f in FIELDS}


def masked_cross_entropy(logits: Tensor, targets: np.ndarray, mask: np.ndarray) -> Tensor:
    """Mean CE over positions where mask is true; logits (B, n, C)."""
    b, n, c = logits.shape
    flat = reshape(logits, (b * n, c))
    tgt = np.asarray(targets, dtype=np.int64).reshape(-1)
    m = np.asarray(mask, dtype=np.float64).reshape(-1)
    picked = gather_rows(log_softmax(flat, axis=-1), tgt)
    total = max(m.sum(), 1.0)
    return mul(tsum(mul(picked, -m)), 1.0 / total)


def drum_loss(
    logits: dict[str, Tensor],
    targets: dict[str, np.ndarray],
    mask: np.ndarray,
    weights: dict[str, float],
) -> Tensor:
    """Vocabulary-size-weighted sum of per-field cross-entropies."""
    total = None
    for f in FIELDS:
        term = mul(masked_cross_entropy(logits[f], targets[f], mask), weights[f])
        total = term if total is None else add(total, term)
    return total


def teacher_forcing_batch(
    vocab: Vocab, sequences: list[list[TokenQuad]]
) -> tuple[dict[str, np.ndarray], np.ndarray, dict[str, np.ndarray], np.ndarray]:
    """Pad BOS..EOS sequences into (inputs, groups, shifted targets, mask)."""
    encoded = [sequence_ids(vocab, seq, bos=True, eos=True) for seq in sequences]
    max_len = max(ids["event"].size for ids, _ in encoded)
    b = len(encoded)
    inputs = {f: np.full((b, max_len - 1), PAD, dtype=np.int64) for f in FIELDS}
    targets = {f: np.full((b, max_len - 1), PAD, dtype=np.int64) for f in FIELDS}
    groups = np.zeros((b, max_len - 1), dtype=np.int64)
    mask = np.zeros((b, max_len - 1), dtype=bool)
    for i, (ids, g) in enumerate(encoded):
        n = ids["event"].size
        for f in FIELDS:
            inputs[f][i, : n - 1] = ids[f][:-1]
            targets[f][i, : n - 1] = ids[f][1:]
        groups[i, : n - 1] = g[:-1]
        mask[i, : n - 1] = True
    return inputs, groups, targets, mask


def train_step(
    store: ParamStore,
    cfg: DrumConfig,
    z_batch: np.ndarray,
    sequences: list[list[TokenQuad]],
    vocab: Vocab,
    opt,
    t: int,
    schedule=None,
    prefix: str = "drum",
) -> float:
    """One teacher-forcing update on a batch of (conditioning, drum target).

    Returns the scalar loss before the update.
    """
    from ..nn import backward
    from ..nn.optim import Schedule, adam_step

    if not sequences:
        raise ValueError("empty batch")
    if schedule is None:
        schedule = Schedule()
    inputs, groups, targets, mask = teacher_forcing_batch(vocab, sequences)
    memory = encode_condition(store, cfg, z_batch, prefix=prefix)
    logits = drum_forward(store, cfg, inputs, groups, memory, vocab, prefix=prefix)
    loss = drum_loss(logits, targets, mask, field_weights(vocab))
    grads, _ = backward(loss, store)
    adam_step(store, grads, opt, t, schedule)
    return loss.item()

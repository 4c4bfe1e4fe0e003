"""Bidirectional masked model over the full quad sequence."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..midi.vocab import FIELDS, Vocab
from ..nn import ParamStore, Tensor, add, backward, embed, gather_rows, log_softmax, mul, tsum
from ..nn.layers import (
    init_embedding,
    init_linear,
    init_norm,
    init_relative_bias,
    init_transformer_layer,
    linear,
    norm,
    relative_bias,
    transformer_layer,
)
from ..nn.optim import AdamState, Schedule, adam_step
from .masking import MaskingError, measure_mask


@dataclass(frozen=True)
class BertConfig:
    hidden: int = 768
    n_heads: int = 12
    n_layers: int = 12
    d_ff: int = 3072
    rel_clip: int = 128
    max_len: int = 4096

    def __post_init__(self):
        if self.hidden % self.n_heads:
            raise ValueError(f"hidden {self.hidden} not divisible by {self.n_heads} heads")

    @staticmethod
    def desk(hidden: int = 64) -> "BertConfig":
        return BertConfig(hidden=hidden, n_heads=4, n_layers=2, d_ff=128, max_len=1024)

    def to_json(self) -> dict:
        return {
            "hidden": self.hidden,
            "n_heads": self.n_heads,
            "n_layers": self.n_layers,
            "d_ff": self.d_ff,
            "rel_clip": self.rel_clip,
            "max_len": self.max_len,
        }

    @classmethod
    def from_json(cls, blob: dict) -> "BertConfig":
        return cls(**blob)


def init_bert(store: ParamStore, gen, cfg: BertConfig, vocab: Vocab, prefix: str = "bert"):
    sizes = vocab.sizes
    for f in FIELDS:
        init_embedding(store, gen, f"{prefix}.embed.{f}", sizes[f], cfg.hidden)
    for i in range(cfg.n_layers):
        init_transformer_layer(store, gen, f"{prefix}.layer{i}", cfg.hidden, cfg.n_heads, cfg.d_ff)
        init_relative_bias(store, f"{prefix}.layer{i}.rel", cfg.n_heads, cfg.rel_clip, causal=False)
    init_norm(store, f"{prefix}.ln_out", cfg.hidden)
    for f in FIELDS:
        init_linear(store, gen, f"{prefix}.head.{f}", cfg.hidden, sizes[f])


def bert_forward(
    store: ParamStore,
    cfg: BertConfig,
    ids: dict[str, np.ndarray],
    pos_groups: np.ndarray,
    key_padding: np.ndarray | None = None,
    prefix: str = "bert",
) -> dict[str, Tensor]:
    """Bidirectionally contextualized per-field logits at every position.

    ids: field -> (B, n); pos_groups: (B, n); key_padding: optional bool
    (B, n), True for real tokens.
    """
    n = ids["event"].shape[-1]
    if n > cfg.max_len:
        raise ValueError(f"sequence length {n} exceeds max_len {cfg.max_len}")
    x = None
    for f in FIELDS:
        e = embed(store[f"{prefix}.embed.{f}"], ids[f])
        x = e if x is None else add(x, e)
    mask = None
    if key_padding is not None:
        mask = np.asarray(key_padding, dtype=bool)[:, None, None, :]
    for i in range(cfg.n_layers):
        bias = relative_bias(
            store, f"{prefix}.layer{i}.rel", pos_groups, pos_groups, cfg.rel_clip, causal=False
        )
        x = transformer_layer(store, f"{prefix}.layer{i}", x, cfg.n_heads, self_mask=mask, self_bias=bias)
    x = norm(store, f"{prefix}.ln_out", x)
    return {f: linear(store, f"{prefix}.head.{f}", x) for f in FIELDS}


def pad_batch(
    examples: list,
) -> tuple[dict[str, np.ndarray], np.ndarray, np.ndarray]:
    """Stack variable-length masked examples into padded id arrays."""
    from ..midi.vocab import PAD

    max_len = max(ex.ids["event"].size for ex in examples)
    b = len(examples)
    ids = {f: np.full((b, max_len), PAD, dtype=np.int64) for f in FIELDS}
    groups = np.zeros((b, max_len), dtype=np.int64)
    real = np.zeros((b, max_len), dtype=bool)
    for i, ex in enumerate(examples):
        n = ex.ids["event"].size
        for f in FIELDS:
            ids[f][i, :n] = ex.ids[f]
        groups[i, :n] = ex.pos_groups
        real[i, :n] = True
    return ids, groups, real


def weighted_loss(
    logits: dict[str, Tensor], examples: list, vocab: Vocab
) -> Tensor:
    """Per-field mean CE over masked positions, weighted by vocabulary size.

    loss = sum_f (|V_f| / sum |V|) * meanCE_f; fields without masked
    positions contribute nothing. Raises MaskingError when no example masks
    anything.
    """
    sizes = vocab.sizes
    total_size = sum(sizes.values())
    total = None
    any_masked = False
    for f in FIELDS:
        rows: list[int] = []
        cols: list[np.ndarray] = []
        tgts: list[np.ndarray] = []
        for i, ex in enumerate(examples):
            fm = ex.field_masks().get(f)
            if fm is None:
                continue
            positions, targets = fm
            where = np.flatnonzero(positions)
            if where.size == 0:
                continue
            rows.extend([i] * where.size)
            cols.append(where)
            tgts.append(targets[where])
        if not rows:
            continue
        any_masked = True
        row_idx = np.asarray(rows, dtype=np.int64)
        col_idx = np.concatenate(cols)
        target_idx = np.concatenate(tgts)
        picked_logits = logits[f][row_idx, col_idx]  # (k, |V_f|)
        logp = gather_rows(log_softmax(picked_logits, axis=-1), target_idx)
        term = mul(tsum(logp), -(sizes[f] / total_size) / target_idx.size)
        total = term if total is None else add(total, term)
    if not any_masked:
        raise MaskingError("no masked positions in batch")
    return total


def train_step_bert(
    store: ParamStore,
    cfg: BertConfig,
    sequences: list,
    vocab: Vocab,
    opt: AdamState,
    t: int,
    gen: np.random.Generator,
    mask_rate: float = 0.15,
    schedule: Schedule | None = None,
    completion_prob: float = 0.0,
    prefix: str = "bert",
) -> float:
    """One masked-modeling update; masking is drawn on the fly.

    With probability ``completion_prob`` an example is masked in completion
    style (one whole non-drum track) instead of the measure-aware scheme,
    which matches how the model is queried at inference.
    """
    from .complete import track_completion_example, non_drum_tracks

    if schedule is None:
        schedule = Schedule()
    examples = []
    for seq in sequences:
        tracks = non_drum_tracks(seq)
        if tracks and gen.random() < completion_prob:
            track = tracks[int(gen.integers(len(tracks)))]
            examples.append(track_completion_example(seq, track, vocab, gen))
        else:
            examples.append(measure_mask(seq, vocab, gen, mask_rate))
    ids, groups, real = pad_batch(examples)
    logits = bert_forward(store, cfg, ids, groups, key_padding=real, prefix=prefix)
    loss = weighted_loss(logits, examples, vocab)
    grads, _ = backward(loss, store)
    adam_step(store, grads, opt, t, schedule)
    return loss.item()

"""Measure-aware masking for self-supervised pretraining.

One token field is chosen per example; a fraction of that field's tokens is
selected, spread over at least two measures whenever the sequence has them.
Selected ids get the BERT treatment: 80% MASK, 10% a random in-field token,
10% left unchanged.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..midi.tokens import BOM, TokenQuad
from ..midi.vocab import FIELDS, MASK, PAD, Vocab
from ..drum.model import sequence_ids


class MaskingError(ValueError):
    pass


@dataclass
class MaskedBatch:
    """One masked example; targets are -1 everywhere except masked positions."""

    ids: dict[str, np.ndarray]
    pos_groups: np.ndarray
    mask_positions: np.ndarray
    targets: np.ndarray
    mask_field: str
    single_measure_fallback: bool = False

    def field_masks(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {self.mask_field: (self.mask_positions, self.targets)}


@dataclass
class CompletionBatch:
    """Completion-style example: event and duration masked on planned slots."""

    ids: dict[str, np.ndarray]
    pos_groups: np.ndarray
    masks: dict[str, np.ndarray] = field(default_factory=dict)
    targets: dict[str, np.ndarray] = field(default_factory=dict)

    def field_masks(self) -> dict[str, tuple[np.ndarray, np.ndarray]]:
        return {f: (self.masks[f], self.targets[f]) for f in self.masks}


def measure_index(tokens: list[TokenQuad]) -> np.ndarray:
    """Measure number of each token; the BOM belongs to the measure it opens."""
    idx = np.zeros(len(tokens), dtype=np.int64)
    current = -1
    for i, tok in enumerate(tokens):
        if tok.event == BOM:
            current += 1
        idx[i] = max(current, 0)
    return idx


def measure_mask(
    tokens: list[TokenQuad],
    vocab: Vocab,
    gen: np.random.Generator,
    mask_rate: float = 0.15,
) -> MaskedBatch:
    """Mask one uniformly chosen field across different measures.

    Positions are picked round-robin over the measures that hold eligible
    tokens (shuffled order), so whenever two or more measures qualify the
    picks span at least two. A single-measure sequence falls back to
    in-measure selection and is flagged.
    """
    if not tokens:
        raise MaskingError("empty token sequence")
    ids, groups = sequence_ids(vocab, tokens)
    mask_field = FIELDS[int(gen.integers(len(FIELDS)))]
    eligible = (
        np.arange(len(tokens))
        if mask_field == "event"
        else np.flatnonzero(ids[mask_field] != PAD)
    )
    if eligible.size == 0:
        raise MaskingError(f"no tokens carry field {mask_field!r}")

    measures = measure_index(tokens)
    by_measure: dict[int, list[int]] = {}
    for pos in eligible:
        by_measure.setdefault(int(measures[pos]), []).append(int(pos))

    n_measures = int(measures.max()) + 1 if len(tokens) else 0
    multi = len(by_measure) >= 2
    k = max(1, int(round(mask_rate * eligible.size)))
    if multi:
        k = max(k, 2)
    k = min(k, eligible.size)

    order = sorted(by_measure)
    gen.shuffle(order)
    pools = {m: np.array(by_measure[m]) for m in order}
    for m in order:
        gen.shuffle(pools[m])
    chosen: list[int] = []
    cursor = {m: 0 for m in order}
    while len(chosen) < k:
        progressed = False
        for m in order:
            if len(chosen) >= k:
                break
            if cursor[m] < pools[m].size:
                chosen.append(int(pools[m][cursor[m]]))
                cursor[m] += 1
                progressed = True
        if not progressed:
            break

    content = np.array(vocab.content_ids(mask_field), dtype=np.int64)
    out_ids = {f: ids[f].copy() for f in FIELDS}
    mask_positions = np.zeros(len(tokens), dtype=bool)
    targets = np.full(len(tokens), -1, dtype=np.int64)
    for pos in chosen:
        mask_positions[pos] = True
        targets[pos] = ids[mask_field][pos]
        roll = gen.random()
        if roll < 0.8:
            out_ids[mask_field][pos] = MASK
        elif roll < 0.9:
            # a random in-field token other than the original (a field with
            # a single content value has nothing else to offer)
            pool = content[content != ids[mask_field][pos]]
            if pool.size:
                out_ids[mask_field][pos] = int(pool[int(gen.integers(pool.size))])
        # else unchanged

    return MaskedBatch(
        ids=out_ids,
        pos_groups=groups,
        mask_positions=mask_positions,
        targets=targets,
        mask_field=mask_field,
        single_measure_fallback=not multi and n_measures <= 1,
    )

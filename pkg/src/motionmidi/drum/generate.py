"""Autoregressive sampling with a structural grammar over event tokens.

The grammar keeps every sampled sequence decodable: a measure opens with
BOM, positions strictly increase inside a measure, a chord may only follow
its position token, and pitches only appear under an open position. Illegal
events are masked to -inf before sampling, so the support is never empty.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..midi.tokens import BOM, TokenQuad, event_value
from ..midi.vocab import BOS_ID, EOS_ID, N_SPECIALS, PAD, Vocab
from ..nn import ParamStore
from .model import DrumConfig, drum_forward, encode_condition


@dataclass(frozen=True)
class Sampler:
    temperature: float = 1.0
    top_k: int = 16


class GenerationError(RuntimeError):
    pass


@dataclass
class _EventTables:
    """Event-id classification derived from a vocabulary."""

    kind: np.ndarray  # 0 special, 1 BOM, 2 POS, 3 CHORD, 4 PITCH
    value: np.ndarray

    @classmethod
    def build(cls, vocab: Vocab) -> "_EventTables":
        size = vocab.sizes["event"]
        kind = np.zeros(size, dtype=np.int64)
        value = np.full(size, -1, dtype=np.int64)
        for event, idx in vocab.tables["event"].items():
            if event == BOM:
                kind[idx] = 1
            elif event.startswith("POS_"):
                kind[idx] = 2
                value[idx] = event_value(event)
            elif event.startswith("CHORD_"):
                kind[idx] = 3
            elif event.startswith("PITCH_"):
                kind[idx] = 4
                value[idx] = event_value(event)
        return cls(kind=kind, value=value)


def _legal_events(
    tables: _EventTables, state: str, last_slot: int, group_pitches: set[int]
) -> np.ndarray:
    """Allowed next events per grammar state.

    start: BOM only. measure (just opened): any position, another BOM, or
    EOS. position: chord or pitch. chord: pitch only. pitch: further
    pitches of the group (no repeats), a strictly later position, BOM, or
    EOS.
    """
    legal = np.zeros(tables.kind.size, dtype=bool)
    if state == "start":
        legal[tables.kind == 1] = True
    elif state == "measure":
        legal[tables.kind == 2] = True
        legal[tables.kind == 1] = True
        legal[EOS_ID] = True
    elif state == "position":
        legal[tables.kind == 3] = True
        legal[tables.kind == 4] = True
    elif state == "chord":
        legal[tables.kind == 4] = True
    elif state == "pitch":
        legal[(tables.kind == 2) & (tables.value > last_slot)] = True
        legal[tables.kind == 1] = True
        legal[EOS_ID] = True
        legal[tables.kind == 4] = True
    else:
        raise GenerationError(f"unknown grammar state {state!r}")
    if group_pitches:
        for value in group_pitches:
            legal[(tables.kind == 4) & (tables.value == value)] = False
    return legal


def _sample_masked(
    logits: np.ndarray, legal: np.ndarray, sampler: Sampler, gen: np.random.Generator
) -> int:
    if not legal.any():
        raise GenerationError("grammar produced an empty support")
    scores = np.where(legal, logits, -np.inf)
    if sampler.temperature <= 1e-8:
        return int(np.argmax(scores))
    if sampler.top_k > 0:
        k = min(sampler.top_k, int(legal.sum()))
        keep = np.argsort(-scores, kind="stable")[:k]
        mask = np.zeros_like(legal)
        mask[keep] = True
        scores = np.where(mask, scores, -np.inf)
    scaled = scores / sampler.temperature
    scaled -= scaled.max()
    probs = np.exp(scaled)
    probs /= probs.sum()
    return int(gen.choice(probs.size, p=probs))


def _content_only(size: int) -> np.ndarray:
    legal = np.zeros(size, dtype=bool)
    legal[N_SPECIALS:] = True
    return legal


def generate(
    store: ParamStore,
    cfg: DrumConfig,
    vocab: Vocab,
    z: np.ndarray,
    gen: np.random.Generator,
    sampler: Sampler = Sampler(),
    max_measures: int = 8,
    prefix: str = "drum",
) -> list[TokenQuad]:
    """Sample a structurally valid drum token sequence conditioned on z.

    z is (T, d_model) for one clip. Generation starts from BOS and stops at
    EOS, after ``max_measures`` BOM tokens, or at the model's length cap.
    """
    if z.ndim != 2:
        raise GenerationError(f"z must be (T, d_model), got {z.shape}")
    tables = _EventTables.build(vocab)
    memory = encode_condition(store, cfg, z[None], prefix=prefix)

    ids = {f: [PAD] for f in ("duration", "track", "instrument")}
    ids["event"] = [BOS_ID]
    groups = [0]
    tokens: list[TokenQuad] = []

    state = "start"
    last_slot = -1
    measures = 0
    group_pitches: set[int] = set()

    def push(event_id: int, dur_id: int, track_id: int, instr_id: int, group: int):
        ids["event"].append(event_id)
        ids["duration"].append(dur_id)
        ids["track"].append(track_id)
        ids["instrument"].append(instr_id)
        groups.append(group)

    while len(tokens) + 1 < cfg.max_len:
        batch_ids = {f: np.asarray(v, dtype=np.int64)[None] for f, v in ids.items()}
        logits = drum_forward(
            store, cfg, batch_ids, np.asarray(groups)[None], memory, vocab, prefix=prefix
        )
        last = {f: logits[f].data[0, -1] for f in logits}

        legal = _legal_events(tables, state, last_slot, group_pitches)
        event_id = _sample_masked(last["event"], legal, sampler, gen)
        kind = tables.kind[event_id]

        if event_id == EOS_ID:
            break
        if kind == 1:  # BOM
            if measures >= max_measures:
                break
            measures += 1
            state = "measure"
            last_slot = -1
            group_pitches = set()
            tokens.append(TokenQuad(event=BOM, pos_group=groups[-1]))
            push(event_id, PAD, PAD, PAD, groups[-1])
        elif kind == 2:  # position
            state = "position"
            last_slot = int(tables.value[event_id])
            group_pitches = set()
            tokens.append(
                TokenQuad(event=vocab.decode_value("event", event_id), pos_group=groups[-1] + 1)
            )
            push(event_id, PAD, PAD, PAD, groups[-1] + 1)
        elif kind == 3:  # chord
            state = "chord"
            tokens.append(
                TokenQuad(event=vocab.decode_value("event", event_id), pos_group=groups[-1])
            )
            push(event_id, PAD, PAD, PAD, groups[-1])
        else:  # pitch with attached fields
            state = "pitch"
            group_pitches.add(int(tables.value[event_id]))
            dur_id = _sample_masked(
                last["duration"], _content_only(vocab.sizes["duration"]), sampler, gen
            )
            track_id = _sample_masked(
                last["track"], _content_only(vocab.sizes["track"]), sampler, gen
            )
            instr_id = _sample_masked(
                last["instrument"], _content_only(vocab.sizes["instrument"]), sampler, gen
            )
            tokens.append(
                TokenQuad(
                    event=vocab.decode_value("event", event_id),
                    duration=vocab.decode_value("duration", dur_id),
                    track=vocab.decode_value("track", track_id),
                    instrument=vocab.decode_value("instrument", instr_id),
                    pos_group=groups[-1],
                )
            )
            push(event_id, dur_id, track_id, instr_id, groups[-1])

    return tokens

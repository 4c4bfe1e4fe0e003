"""Track completion: fill non-drum tracks around a fixed drum skeleton.

A scaffold plans, per measure and per target track, how many position
slots to fill and how many pitches each gets. The planned tokens enter the
sequence as masked placeholders at the end of their measure (position
placeholders mask the event field; pitch placeholders mask event and
duration, with track/instrument fixed by the plan). Masked slots are then
resolved iteratively, most confident first, a tenth of the slots per
round. Drum tokens are never touched; the same builder also produces
inference-shaped training examples by stripping a track whose content is
known.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..midi.tokens import BOM, TokenQuad
from ..midi.vocab import MASK, N_SPECIALS, Vocab
from ..drum.generate import Sampler, _sample_masked
from ..drum.model import sequence_ids
from ..nn import ParamStore
from .masking import CompletionBatch
from .model import BertConfig, bert_forward


class CompletionError(ValueError):
    pass


@dataclass(frozen=True)
class TrackPlan:
    """One track's slots to fill in one measure: pitches per position."""

    track: int
    instrument: int
    pitch_counts: tuple[int, ...]


Scaffold = list[list[TrackPlan]]  # indexed by measure


def split_measures(tokens: list[TokenQuad]) -> list[list[TokenQuad]]:
    measures: list[list[TokenQuad]] = []
    for tok in tokens:
        if tok.event == BOM:
            measures.append([tok])
        elif measures:
            measures[-1].append(tok)
        else:
            raise CompletionError("token before first BOM")
    return measures


def _groups_of_measure(measure: list[TokenQuad]) -> list[tuple[TokenQuad, list[TokenQuad]]]:
    """(position token, trailing tokens of its group) pairs, in order."""
    groups = []
    for tok in measure:
        if tok.is_position():
            groups.append((tok, []))
        elif groups:
            groups[-1][1].append(tok)
    return groups


def non_drum_tracks(tokens: list[TokenQuad]) -> list[int]:
    from ..midi.notes import DRUM_INSTRUMENT

    return sorted(
        {t.track for t in tokens if t.is_pitch() and t.instrument != DRUM_INSTRUMENT}
    )


def extract_track(
    tokens: list[TokenQuad], track: int
) -> tuple[list[TokenQuad], Scaffold, list[list[tuple[TokenQuad, list[TokenQuad]]]]]:
    """Remove one track's notes; plan how to ask for them back.

    Returns the remaining tokens, the scaffold, and the per-measure truth:
    for every planned position, the original position token and its removed
    pitch tokens (slot order preserved). Positions left without any pitch
    disappear from the remaining sequence.
    """
    base: list[TokenQuad] = []
    scaffold: Scaffold = []
    truth: list[list[tuple[TokenQuad, list[TokenQuad]]]] = []
    for measure in split_measures(tokens):
        base.append(measure[0])  # BOM
        counts: list[int] = []
        instrument = None
        measure_truth: list[tuple[TokenQuad, list[TokenQuad]]] = []
        for position, tail in _groups_of_measure(measure):
            mine = [t for t in tail if t.is_pitch() and t.track == track]
            rest = [t for t in tail if not (t.is_pitch() and t.track == track)]
            if mine:
                counts.append(len(mine))
                instrument = mine[0].instrument
                measure_truth.append((position, mine))
            if any(t.is_pitch() for t in rest):
                base.append(position)
                base.extend(rest)
        plans = (
            [TrackPlan(track=track, instrument=int(instrument), pitch_counts=tuple(counts))]
            if counts
            else []
        )
        scaffold.append(plans)
        truth.append(measure_truth)
    return base, scaffold, truth


@dataclass
class _Slot:
    position: int  # token index in the built sequence
    fieldname: str  # "event" or "duration"
    restrict: str  # "position" or "pitch" (event slots) / "content" (duration)
    plan_key: tuple | None = None  # (measure, plan index) for position slots
    ordinal: int = 0  # rank of this position within its plan


@dataclass
class CompletionProblem:
    ids: dict[str, np.ndarray]
    pos_groups: np.ndarray
    slots: list[_Slot]
    fixed: list[TokenQuad | None]  # original quads; None at placeholders
    placeholder_fields: list[tuple[int | None, int | None]]  # (track, instrument)


def build_completion(
    base_tokens: list[TokenQuad], scaffold: Scaffold, vocab: Vocab, max_len: int = 1 << 30
) -> CompletionProblem:
    """Append masked placeholders to each measure per its plans.

    Slot order is deterministic: measures in order, plans in order, one
    event slot per planned position followed by (event, duration) slots per
    planned pitch.
    """
    measures = split_measures(base_tokens) if base_tokens else []
    if len(scaffold) > len(measures):
        raise CompletionError(
            f"scaffold plans {len(scaffold)} measures, sequence has {len(measures)}"
        )
    quads: list[TokenQuad] = []
    fixed: list[TokenQuad | None] = []
    placeholder_fields: list[tuple[int | None, int | None]] = []
    slots: list[_Slot] = []
    group = 0
    for m, measure in enumerate(measures):
        for tok in measure:
            if tok.is_position():
                group += 1
            quads.append(
                TokenQuad(
                    event=tok.event,
                    duration=tok.duration,
                    track=tok.track,
                    instrument=tok.instrument,
                    pos_group=group,
                )
            )
            fixed.append(quads[-1])
            placeholder_fields.append((None, None))
        for plan_idx, plan in enumerate(scaffold[m] if m < len(scaffold) else []):
            for ordinal, count in enumerate(plan.pitch_counts):
                group += 1
                # BOM stands in for the masked event purely so the vocab
                # lookup succeeds; the id is overwritten with MASK below.
                quads.append(TokenQuad(event=BOM, pos_group=group))
                fixed.append(None)
                placeholder_fields.append((None, None))
                slots.append(
                    _Slot(len(quads) - 1, "event", "position", plan_key=(m, plan_idx), ordinal=ordinal)
                )
                for _ in range(count):
                    quads.append(
                        TokenQuad(
                            event=BOM,
                            duration=None,
                            track=plan.track,
                            instrument=plan.instrument,
                            pos_group=group,
                        )
                    )
                    fixed.append(None)
                    placeholder_fields.append((plan.track, plan.instrument))
                    slots.append(_Slot(len(quads) - 1, "event", "pitch"))
                    slots.append(_Slot(len(quads) - 1, "duration", "content"))
    if len(quads) > max_len:
        raise CompletionError(f"scaffold yields {len(quads)} tokens, cap is {max_len}")

    ids, groups = sequence_ids(vocab, quads)
    for slot in slots:
        ids[slot.fieldname][slot.position] = MASK
    return CompletionProblem(
        ids=ids,
        pos_groups=groups,
        slots=slots,
        fixed=fixed,
        placeholder_fields=placeholder_fields,
    )


def _restriction_mask(vocab: Vocab, fieldname: str, restrict: str) -> np.ndarray:
    size = vocab.sizes[fieldname]
    mask = np.zeros(size, dtype=bool)
    if fieldname != "event" or restrict == "content":
        mask[N_SPECIALS:] = True
        return mask
    prefix = "POS_" if restrict == "position" else "PITCH_"
    for event, idx in vocab.tables["event"].items():
        if event.startswith(prefix):
            mask[idx] = True
    return mask


def _position_values(vocab: Vocab) -> dict[int, int]:
    """event id -> slot value for every position event in the vocabulary."""
    values = {}
    for event, idx in vocab.tables["event"].items():
        if event.startswith("POS_"):
            values[idx] = int(event.rsplit("_", 1)[1])
    return values


def _ordered_restriction(
    slot: _Slot,
    static: np.ndarray,
    pos_values: dict[int, int],
    filled: dict[tuple, dict[int, int]],
) -> np.ndarray:
    """Keep planned positions strictly ascending within one plan.

    Already-filled earlier/later ordinals bound the legal slot range; if
    the bounds leave nothing, the static mask applies (decode merges any
    duplicates, so this only relaxes, never breaks, totality).
    """
    if slot.plan_key is None or slot.restrict != "position":
        return static
    siblings = filled.get(slot.plan_key)
    if not siblings:
        return static
    lower = max((v for o, v in siblings.items() if o < slot.ordinal), default=-1)
    upper = min((v for o, v in siblings.items() if o > slot.ordinal), default=1 << 30)
    mask = static.copy()
    for idx, value in pos_values.items():
        if not lower < value < upper:
            mask[idx] = False
    return mask if mask.any() else static


def track_completion_example(
    tokens: list[TokenQuad],
    track: int,
    vocab: Vocab,
    gen: np.random.Generator | None = None,
) -> CompletionBatch:
    """Inference-shaped training example: one track masked, targets known.

    When ``gen`` is given, a random fraction of the planned slots is
    revealed with its true value, so training covers every intermediate
    state the iterative most-confident-first decoder passes through.
    """
    base, scaffold, truth = extract_track(tokens, track)
    problem = build_completion(base, scaffold, vocab)
    n = problem.ids["event"].size
    ids = {f: v.copy() for f, v in problem.ids.items()}
    masks = {f: np.zeros(n, dtype=bool) for f in ("event", "duration")}
    targets = {f: np.full(n, -1, dtype=np.int64) for f in ("event", "duration")}

    stream: list[tuple[str, int]] = []  # (fieldname, target id) per slot
    for measure_truth in truth:
        for position, pitches in measure_truth:
            stream.append(("event", vocab.encode_value("event", position.event)))
            for p in pitches:
                stream.append(("event", vocab.encode_value("event", p.event)))
                stream.append(("duration", vocab.encode_value("duration", p.duration)))
    if len(stream) != len(problem.slots):
        raise CompletionError("truth/slot misalignment")

    if gen is None or not problem.slots:
        still_masked = np.ones(len(problem.slots), dtype=bool)
    else:
        # The decoder resolves slot classes at different speeds (durations
        # first, positions last), so reveal fractions are drawn per class;
        # a quarter of examples keep everything masked, the decoder's
        # opening state.
        if gen.random() < 0.25:
            still_masked = np.ones(len(problem.slots), dtype=bool)
        else:
            fraction = {
                "position": gen.random(),
                "pitch": gen.random(),
                "content": gen.random(),
            }
            still_masked = np.array(
                [gen.random() < fraction[slot.restrict] for slot in problem.slots]
            )
            if not still_masked.any():
                still_masked[int(gen.integers(len(problem.slots)))] = True

    for i, (slot, (fieldname, target)) in enumerate(zip(problem.slots, stream)):
        if fieldname != slot.fieldname:
            raise CompletionError("truth/slot field mismatch")
        if still_masked[i]:
            masks[fieldname][slot.position] = True
            targets[fieldname][slot.position] = target
        else:
            ids[fieldname][slot.position] = target
    return CompletionBatch(ids=ids, pos_groups=problem.pos_groups, masks=masks, targets=targets)


def complete_tracks(
    store: ParamStore,
    cfg: BertConfig,
    vocab: Vocab,
    drum_tokens: list[TokenQuad],
    scaffold: Scaffold,
    gen: np.random.Generator | None = None,
    sampler: Sampler = Sampler(temperature=0.0),
    round_fraction: float = 0.1,
    prefix: str = "bert",
) -> list[TokenQuad]:
    """Fill the scaffold around the given tokens; returns the full sequence.

    The input tokens are preserved verbatim. With an empty scaffold the
    input comes back unchanged. Each round fills the most confident tenth
    (rounded up) of the remaining masked slots; temperature 0 fills by
    argmax, otherwise slot values are sampled.
    """
    if gen is None:
        gen = np.random.Generator(np.random.PCG64(0))
    if not any(plans for plans in scaffold):
        return list(drum_tokens)
    problem = build_completion(drum_tokens, scaffold, vocab, max_len=cfg.max_len)
    ids = {f: v.copy() for f, v in problem.ids.items()}
    remaining = list(range(len(problem.slots)))
    per_round = max(1, int(np.ceil(round_fraction * len(remaining))))
    static = {
        i: _restriction_mask(vocab, s.fieldname, s.restrict)
        for i, s in enumerate(problem.slots)
    }
    pos_values = _position_values(vocab)
    filled: dict[tuple, dict[int, int]] = {}

    while remaining:
        logits = bert_forward(
            store,
            cfg,
            {f: v[None] for f, v in ids.items()},
            problem.pos_groups[None],
            prefix=prefix,
        )
        scored: list[tuple[float, int]] = []
        for i in remaining:
            slot = problem.slots[i]
            row = logits[slot.fieldname].data[0, slot.position]
            legal = _ordered_restriction(slot, static[i], pos_values, filled)
            shifted = np.where(legal, row, -np.inf)
            shifted = shifted - shifted.max()
            probs = np.exp(shifted)
            probs /= probs.sum()
            scored.append((float(probs.max()), i))
        scored.sort(key=lambda pair: (-pair[0], pair[1]))
        for _, i in scored[:per_round]:
            slot = problem.slots[i]
            row = logits[slot.fieldname].data[0, slot.position]
            legal = _ordered_restriction(slot, static[i], pos_values, filled)
            choice = _sample_masked(row, legal, sampler, gen)
            ids[slot.fieldname][slot.position] = choice
            if slot.plan_key is not None and slot.restrict == "position":
                filled.setdefault(slot.plan_key, {})[slot.ordinal] = pos_values.get(choice, 0)
            remaining.remove(i)

    out: list[TokenQuad] = []
    for idx in range(ids["event"].size):
        if problem.fixed[idx] is not None:
            out.append(problem.fixed[idx])
            continue
        track, instrument = problem.placeholder_fields[idx]
        event = vocab.decode_value("event", int(ids["event"][idx]))
        if track is None:
            out.append(TokenQuad(event=event, pos_group=int(problem.pos_groups[idx])))
        else:
            out.append(
                TokenQuad(
                    event=event,
                    duration=vocab.decode_value("duration", int(ids["duration"][idx])),
                    track=track,
                    instrument=instrument,
                    pos_group=int(problem.pos_groups[idx]),
                )
            )
    return out

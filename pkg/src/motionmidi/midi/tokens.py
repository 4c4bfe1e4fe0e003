"""Quad-token codec: (event, duration, track, instrument) plus a
relative-position group.

Each measure is emitted as BOM, then per occupied slot a position token, an
optional chord token, then the pitch tokens carrying duration/track/
instrument. All tokens of one position share a ``pos_group``, which is what
makes note order inside a chord irrelevant downstream.

Event values are strings: ``BOM``, ``POS_<slot>``, ``CHORD_<name>``,
``PITCH_<n>``, and the specials ``BOS``/``EOS``.
"""
from __future__ import annotations

from dataclasses import dataclass

from .notes import (
    CHORD_NAMES,
    Note,
    PositionGroup,
    QuantizedClip,
    SLOTS_PER_MEASURE,
    TICKS_PER_SLOT,
    sort_notes,
)

BOM = "BOM"
BOS = "BOS"
EOS = "EOS"


class TokenError(ValueError):
    pass


@dataclass(frozen=True)
class TokenQuad:
    event: str
    duration: int | None = None
    track: int | None = None
    instrument: int | None = None
    pos_group: int = 0

    def is_pitch(self) -> bool:
        return self.event.startswith("PITCH_")

    def is_position(self) -> bool:
        return self.event.startswith("POS_")

    def is_chord(self) -> bool:
        return self.event.startswith("CHORD_")

    def is_structural(self) -> bool:
        return not self.is_pitch()


def position_event(slot: int) -> str:
    if not 0 <= slot < SLOTS_PER_MEASURE:
        raise TokenError(f"slot {slot} outside 0..{SLOTS_PER_MEASURE - 1}")
    return f"POS_{slot}"


def pitch_event(pitch: int) -> str:
    if not 0 <= pitch <= 127:
        raise TokenError(f"pitch {pitch} outside 0..127")
    return f"PITCH_{pitch}"


def chord_event(name: str) -> str:
    if name not in CHORD_NAMES:
        raise TokenError(f"unknown chord {name!r}")
    return f"CHORD_{name}"


def event_value(event: str) -> int:
    """Numeric payload of a POS_/PITCH_ event string."""
    return int(event.rsplit("_", 1)[1])


def encode(clip: QuantizedClip, vocab=None) -> list[TokenQuad]:
    """Quad tokens for a quantized clip; one BOM per measure.

    When ``vocab`` is given every emitted token is checked against it and a
    TokenError naming the offending field/value is raised on a miss.
    """
    tokens: list[TokenQuad] = []
    group = 0
    for measure in clip.measures:
        tokens.append(TokenQuad(event=BOM, pos_group=group))
        for pos in measure:
            group += 1
            tokens.append(TokenQuad(event=position_event(pos.slot), pos_group=group))
            if pos.chord is not None:
                tokens.append(TokenQuad(event=chord_event(pos.chord), pos_group=group))
            for note in pos.notes:
                tokens.append(
                    TokenQuad(
                        event=pitch_event(note.pitch),
                        duration=note.duration,
                        track=note.track,
                        instrument=note.instrument,
                        pos_group=group,
                    )
                )
    if vocab is not None:
        for t in tokens:
            vocab.validate(t)
    return tokens


def decode(tokens: list[TokenQuad], vocab=None, ticks_per_slot: int = TICKS_PER_SLOT) -> QuantizedClip:
    """Rebuild a QuantizedClip; the inverse of :func:`encode`.

    Pitch-token order inside one pos_group does not matter: notes are
    re-sorted into canonical order per position. BOS/EOS wrappers are
    skipped. Structural violations (pitch before any position, position
    before any BOM) raise TokenError with the token index.
    """
    measures: list[dict[int, tuple[str | None, list[Note]]]] = []
    current_slot: int | None = None

    for idx, tok in enumerate(tokens):
        if vocab is not None:
            vocab.validate(tok)
        if tok.event in (BOS, EOS):
            continue
        if tok.event == BOM:
            measures.append({})
            current_slot = None
        elif tok.is_position():
            if not measures:
                raise TokenError(f"token {idx}: position before any BOM")
            current_slot = event_value(tok.event)
            measures[-1].setdefault(current_slot, (None, []))
        elif tok.is_chord():
            if not measures or current_slot is None:
                raise TokenError(f"token {idx}: chord before any position")
            _, notes = measures[-1][current_slot]
            measures[-1][current_slot] = (tok.event.split("_", 1)[1], notes)
        elif tok.is_pitch():
            if not measures or current_slot is None:
                raise TokenError(f"token {idx}: pitch before any position")
            if tok.duration is None or tok.track is None or tok.instrument is None:
                raise TokenError(f"token {idx}: pitch token with missing fields")
            _, notes = measures[-1][current_slot]
            notes.append(
                Note(
                    onset=0,
                    track=tok.track,
                    pitch=event_value(tok.event),
                    duration=tok.duration,
                    instrument=tok.instrument,
                )
            )
        else:
            raise TokenError(f"token {idx}: unknown event {tok.event!r}")

    out = QuantizedClip(measures=[], ticks_per_slot=ticks_per_slot)
    for measure in measures:
        groups = []
        for slot in sorted(measure):
            chord, notes = measure[slot]
            groups.append(
                PositionGroup(slot=slot, chord=chord, notes=tuple(sort_notes(notes)))
            )
        out.measures.append(groups)
    return out


# Text serialization: one quad per line, tab-separated
# "event duration track instrument pos_group"; "-" marks an absent field;
# lines starting with "#" are comments.

def tokens_to_text(tokens: list[TokenQuad]) -> str:
    lines = ["# event\tduration\ttrack\tinstrument\tpos_group"]
    for t in tokens:
        lines.append(
            "\t".join(
                [
                    t.event,
                    "-" if t.duration is None else str(t.duration),
                    "-" if t.track is None else str(t.track),
                    "-" if t.instrument is None else str(t.instrument),
                    str(t.pos_group),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def tokens_from_text(text: str) -> list[TokenQuad]:
    tokens = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise TokenError(f"line {lineno}: expected 5 tab-separated fields")
        event, dur, track, instr, group = parts
        tokens.append(
            TokenQuad(
                event=event,
                duration=None if dur == "-" else int(dur),
                track=None if track == "-" else int(track),
                instrument=None if instr == "-" else int(instr),
                pos_group=int(group),
            )
        )
    return tokens

"""Note events and measure/slot quantization.

Time is metrical throughout: 4/4 meter, 64 position slots per measure.
With the default 480 ticks per quarter a measure spans 1920 ticks and a
slot spans 30 ticks.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

# Distinguished instrument id for the percussion channel (one past the
# 0..127 general-MIDI program range).
DRUM_INSTRUMENT = 128

# General-MIDI programs of the 13-type instrument set used by the paired
# corpora (12 pitched programs plus the drum sentinel).
STANDARD_INSTRUMENTS = (0, 8, 16, 24, 32, 40, 48, 62, 64, 72, 80, 88, DRUM_INSTRUMENT)

TICKS_PER_QUARTER = 480
SLOTS_PER_MEASURE = 64
QUARTERS_PER_MEASURE = 4
TICKS_PER_MEASURE = TICKS_PER_QUARTER * QUARTERS_PER_MEASURE
TICKS_PER_SLOT = TICKS_PER_MEASURE // SLOTS_PER_MEASURE

MAX_DURATION_CLASS = 32

# Quantization normalizes velocity: dynamics are out of codec scope.
DEFAULT_VELOCITY = 100


class NoteError(ValueError):
    pass


@dataclass(frozen=True, order=True)
class Note:
    """One pitched or percussive event.

    ``instrument`` is a general-MIDI program 0..127, or DRUM_INSTRUMENT for
    percussion; for drums ``pitch`` is the percussion key number.
    """

    onset: int
    track: int
    pitch: int
    duration: int
    instrument: int = 0
    velocity: int = 100

    def __post_init__(self):
        if not 0 <= self.pitch <= 127:
            raise NoteError(f"pitch {self.pitch} outside 0..127")
        if self.duration < 1:
            raise NoteError(f"duration {self.duration} must be >= 1 tick")
        if self.onset < 0:
            raise NoteError(f"onset {self.onset} must be >= 0")
        if not (0 <= self.instrument <= 127 or self.instrument == DRUM_INSTRUMENT):
            raise NoteError(f"instrument {self.instrument} not a GM program or drum")
        if not 1 <= self.velocity <= 127:
            raise NoteError(f"velocity {self.velocity} outside 1..127")
        if self.track < 0:
            raise NoteError(f"track {self.track} must be >= 0")

    def is_drum(self) -> bool:
        return self.instrument == DRUM_INSTRUMENT


def sort_notes(notes: list[Note]) -> list[Note]:
    """Canonical order: by track, then (onset, pitch) within the track."""
    return sorted(notes, key=lambda n: (n.track, n.onset, n.pitch, n.duration, n.instrument))


# Chord ids: 24 major/minor triads, named by root pitch class.
_PITCH_CLASS_NAMES = ("C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B")
CHORD_NAMES = tuple(f"{name}" for name in _PITCH_CLASS_NAMES) + tuple(
    f"{name}m" for name in _PITCH_CLASS_NAMES
)
_CHORD_TEMPLATES = {}
for _root in range(12):
    _CHORD_TEMPLATES[frozenset({_root, (_root + 4) % 12, (_root + 7) % 12})] = CHORD_NAMES[_root]
for _root in range(12):
    _minor = frozenset({_root, (_root + 3) % 12, (_root + 7) % 12})
    if _minor not in _CHORD_TEMPLATES:
        _CHORD_TEMPLATES[_minor] = CHORD_NAMES[12 + _root]


def match_chord(pitches: list[int]) -> str | None:
    """Template-match the pitch-class set against the 24 major/minor triads.

    Returns the chord name when the set of pitch classes equals a triad,
    else None. Drums never participate (callers pass pitched notes only).
    """
    classes = frozenset(p % 12 for p in pitches)
    return _CHORD_TEMPLATES.get(classes)


@dataclass(frozen=True)
class PositionGroup:
    """All notes quantized to one slot of one measure."""

    slot: int
    chord: str | None
    notes: tuple[Note, ...]  # onsets/durations in slot units, canonical order


@dataclass
class QuantizedClip:
    """Measures of slot-aligned notes; time signature fixed at 4/4."""

    measures: list[list[PositionGroup]] = field(default_factory=list)
    ticks_per_slot: int = TICKS_PER_SLOT

    def __eq__(self, other):
        if not isinstance(other, QuantizedClip):
            return NotImplemented
        return (
            self.ticks_per_slot == other.ticks_per_slot
            and self.measures == other.measures
        )

    def note_count(self) -> int:
        return sum(len(g.notes) for m in self.measures for g in m)

    def to_notes(self) -> list[Note]:
        """Back to tick-domain notes (onset/duration multiplied out)."""
        out = []
        for m_idx, measure in enumerate(self.measures):
            base = m_idx * SLOTS_PER_MEASURE
            for group in measure:
                for n in group.notes:
                    out.append(
                        replace(
                            n,
                            onset=(base + group.slot) * self.ticks_per_slot,
                            duration=n.duration * self.ticks_per_slot,
                        )
                    )
        return sort_notes(out)


def quantize(notes: list[Note], ticks_per_slot: int = TICKS_PER_SLOT) -> QuantizedClip:
    """Snap onsets to the nearest slot and durations to 1..32 slot classes.

    Zero-length durations after rounding are clamped to one slot; durations
    beyond 32 slots are clamped down.
    """
    if ticks_per_slot <= 0:
        raise NoteError("ticks_per_slot must be > 0")
    by_pos: dict[tuple[int, int], list[Note]] = {}
    for n in notes:
        slot_global = int(n.onset / ticks_per_slot + 0.5)
        dur = int(n.duration / ticks_per_slot + 0.5)
        dur = min(max(dur, 1), MAX_DURATION_CLASS)
        measure, slot = divmod(slot_global, SLOTS_PER_MEASURE)
        by_pos.setdefault((measure, slot), []).append(
            replace(n, onset=0, duration=dur, velocity=DEFAULT_VELOCITY)
        )

    if not by_pos:
        return QuantizedClip(measures=[], ticks_per_slot=ticks_per_slot)

    n_measures = max(m for m, _ in by_pos) + 1
    measures: list[list[PositionGroup]] = [[] for _ in range(n_measures)]
    for (measure, slot) in sorted(by_pos):
        group_notes = tuple(sort_notes(by_pos[(measure, slot)]))
        pitched = [n.pitch for n in group_notes if not n.is_drum()]
        chord = match_chord(pitched) if pitched else None
        measures[measure].append(PositionGroup(slot=slot, chord=chord, notes=group_notes))
    return QuantizedClip(measures=measures, ticks_per_slot=ticks_per_slot)

from .notes import (
    CHORD_NAMES,
    DEFAULT_VELOCITY,
    DRUM_INSTRUMENT,
    MAX_DURATION_CLASS,
    Note,
    NoteError,
    PositionGroup,
    QuantizedClip,
    SLOTS_PER_MEASURE,
    STANDARD_INSTRUMENTS,
    TICKS_PER_MEASURE,
    TICKS_PER_QUARTER,
    TICKS_PER_SLOT,
    match_chord,
    quantize,
    sort_notes,
)
from .smf import DEFAULT_TEMPO_BPM, SmfClip, SmfError, parse_smf, write_smf
from .tokens import (
    BOM,
    BOS,
    EOS,
    TokenError,
    TokenQuad,
    chord_event,
    decode,
    encode,
    event_value,
    pitch_event,
    position_event,
    tokens_from_text,
    tokens_to_text,
)
from .vocab import BOS_ID, EOS_ID, FIELDS, MASK, N_SPECIALS, PAD, Vocab, build_vocab

__all__ = [
    "BOM",
    "BOS",
    "BOS_ID",
    "CHORD_NAMES",
    "DEFAULT_TEMPO_BPM",
    "DEFAULT_VELOCITY",
    "DRUM_INSTRUMENT",
    "EOS",
    "EOS_ID",
    "FIELDS",
    "MASK",
    "MAX_DURATION_CLASS",
    "N_SPECIALS",
    "Note",
    "NoteError",
    "PAD",
    "PositionGroup",
    "QuantizedClip",
    "SLOTS_PER_MEASURE",
    "STANDARD_INSTRUMENTS",
    "SmfClip",
    "SmfError",
    "TICKS_PER_MEASURE",
    "TICKS_PER_QUARTER",
    "TICKS_PER_SLOT",
    "TokenError",
    "TokenQuad",
    "Vocab",
    "build_vocab",
    "chord_event",
    "decode",
    "encode",
    "event_value",
    "match_chord",
    "parse_smf",
    "pitch_event",
    "position_event",
    "quantize",
    "sort_notes",
    "tokens_from_text",
    "tokens_to_text",
    "write_smf",
]

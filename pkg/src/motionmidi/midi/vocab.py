"""Per-field token vocabularies with stable integer ids.

Each of the four fields (event, duration, track, instrument) has its own
table. Ids 0..3 are the specials PAD, MASK, BOS, EOS in every table;
content ids follow in sorted order, so construction is independent of
corpus ordering. PAD doubles as the id of an absent field (None).
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .tokens import TokenQuad, TokenError

FIELDS = ("event", "duration", "track", "instrument")

PAD, MASK, BOS_ID, EOS_ID = 0, 1, 2, 3
_SPECIAL_NAMES = ("<pad>", "<mask>", "<bos>", "<eos>")
N_SPECIALS = len(_SPECIAL_NAMES)


def _event_sort_key(event: str):
    kind, _, payload = event.partition("_")
    order = {"BOM": 0, "POS": 1, "CHORD": 2, "PITCH": 3}.get(kind)
    if order is None:
        raise TokenError(f"unknown event kind {event!r}")
    return (order, int(payload) if payload.isdigit() else 0, payload)


@dataclass
class Vocab:
    tables: dict[str, dict[object, int]] = field(default_factory=dict)

    def __post_init__(self):
        self._inverse = {
            f: {i: v for v, i in table.items()} for f, table in self.tables.items()
        }

    @property
    def sizes(self) -> dict[str, int]:
        return {f: N_SPECIALS + len(self.tables[f]) for f in FIELDS}

    def content_size(self, fieldname: str) -> int:
        return len(self.tables[fieldname])

    def encode_value(self, fieldname: str, value) -> int:
        if value is None:
            return PAD
        table = self.tables[fieldname]
        if value not in table:
            raise TokenError(f"{fieldname} value {value!r} not in vocabulary")
        return table[value]

    def decode_value(self, fieldname: str, idx: int):
        if idx == PAD:
            return None
        if idx < N_SPECIALS:
            raise TokenError(f"{fieldname} id {idx} is a special id")
        value = self._inverse[fieldname].get(idx)
        if value is None:
            raise TokenError(f"{fieldname} id {idx} out of range")
        return value

    def content_ids(self, fieldname: str) -> list[int]:
        return sorted(self.tables[fieldname].values())

    def validate(self, token: TokenQuad) -> None:
        self.encode_value("event", token.event)
        self.encode_value("duration", token.duration)
        self.encode_value("track", token.track)
        self.encode_value("instrument", token.instrument)

    def encode_token(self, token: TokenQuad) -> tuple[int, int, int, int]:
        return (
            self.encode_value("event", token.event),
            self.encode_value("duration", token.duration),
            self.encode_value("track", token.track),
            self.encode_value("instrument", token.instrument),
        )

    def decode_ids(self, ids: tuple[int, int, int, int], pos_group: int = 0) -> TokenQuad:
        event = self.decode_value("event", ids[0]) if ids[0] >= N_SPECIALS else None
        if event is None:
            raise TokenError(f"event id {ids[0]} does not name a content event")
        return TokenQuad(
            event=event,
            duration=self.decode_value("duration", ids[1]),
            track=self.decode_value("track", ids[2]),
            instrument=self.decode_value("instrument", ids[3]),
            pos_group=pos_group,
        )

    def to_json(self) -> dict:
        return {
            f: [[str(v) if f == "event" else v, i] for v, i in sorted(self.tables[f].items(), key=lambda kv: kv[1])]
            for f in FIELDS
        }

    @classmethod
    def from_json(cls, blob: dict) -> "Vocab":
        tables = {}
        for f in FIELDS:
            tables[f] = {(v if f == "event" else int(v)): int(i) for v, i in blob[f]}
        return cls(tables=tables)


def build_vocab(corpus: list[list[TokenQuad]]) -> Vocab:
    """Deterministic vocabulary over a corpus of token sequences.

    Ids depend only on the set of values present (sorted per field), never
    on sequence or corpus order.
    """
    if not corpus:
        raise TokenError("empty corpus")
    values: dict[str, set] = {f: set() for f in FIELDS}
    for seq in corpus:
        for tok in seq:
            values["event"].add(tok.event)
            if tok.duration is not None:
                values["duration"].add(tok.duration)
            if tok.track is not None:
                values["track"].add(tok.track)
            if tok.instrument is not None:
                values["instrument"].add(tok.instrument)

    tables: dict[str, dict[object, int]] = {}
    for f in FIELDS:
        key = _event_sort_key if f == "event" else None
        ordered = sorted(values[f], key=key)
        tables[f] = {v: N_SPECIALS + i for i, v in enumerate(ordered)}
    return Vocab(tables=tables)

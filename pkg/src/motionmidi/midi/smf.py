"""Standard MIDI File reader and writer (types 0 and 1, metrical timing).

The writer always emits type 1 at 480 ticks per quarter with a single tempo
event in track 0 so that output files are bit-stable. One track chunk is
written per note-track index; drum notes go to channel 10 (index 9), pitched
tracks take the remaining channels in order.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

from .notes import DRUM_INSTRUMENT, Note, TICKS_PER_QUARTER, sort_notes

DRUM_CHANNEL = 9
DEFAULT_TEMPO_BPM = 120.0

_NON_DRUM_CHANNELS = tuple(c for c in range(16) if c != DRUM_CHANNEL)


class SmfError(ValueError):
    """Malformed or unsupported Standard MIDI File."""


@dataclass
class SmfClip:
    """Parse result: notes plus the timing context needed for seconds."""

    notes: list[Note]
    ticks_per_quarter: int = TICKS_PER_QUARTER
    tempo_bpm: float = DEFAULT_TEMPO_BPM
    warnings: list[str] = field(default_factory=list)

    def tick_to_seconds(self, tick: int) -> float:
        return tick * 60.0 / (self.tempo_bpm * self.ticks_per_quarter)


def _read_vlq(data: bytes, pos: int) -> tuple[int, int]:
    value = 0
    for _ in range(4):
        if pos >= len(data):
            raise SmfError("truncated variable-length quantity")
        byte = data[pos]
        pos += 1
        value = (value << 7) | (byte & 0x7F)
        if not byte & 0x80:
            return value, pos
    raise SmfError("variable-length quantity longer than 4 bytes")


def _write_vlq(value: int) -> bytes:
    if value < 0:
        raise SmfError("negative delta time")
    chunks = [value & 0x7F]
    value >>= 7
    while value:
        chunks.append(0x80 | (value & 0x7F))
        value >>= 7
    return bytes(reversed(chunks))


def parse_smf(data: bytes) -> SmfClip:
    """Parse a type-0/1 SMF into notes.

    Note-offs resolve the earliest open note-on of the same track, channel
    and pitch (first-in-first-out). Dangling note-ons are clamped to the end
    of their track and counted in ``warnings``. Channel 10 notes get the
    drum instrument; others take the channel's current program (default 0).
    """
    if len(data) < 14 or data[:4] != b"MThd":
        raise SmfError("missing MThd chunk header")
    header_len = struct.unpack(">I", data[4:8])[0]
    if header_len < 6:
        raise SmfError(f"MThd length {header_len} < 6")
    fmt, ntrks, division = struct.unpack(">HHH", data[8:14])
    if fmt not in (0, 1):
        raise SmfError(f"unsupported SMF format {fmt}")
    if division & 0x8000:
        raise SmfError("unsupported SMPTE timing")
    if division == 0:
        raise SmfError("zero ticks per quarter")

    pos = 8 + header_len
    notes: list[Note] = []
    warnings: list[str] = []
    tempo_bpm: float | None = None
    dangling = 0

    for track_idx in range(ntrks):
        if pos + 8 > len(data):
            raise SmfError(f"missing MTrk chunk header for track {track_idx}")
        if data[pos : pos + 4] != b"MTrk":
            raise SmfError(f"bad chunk id {data[pos:pos+4]!r} for track {track_idx}")
        length = struct.unpack(">I", data[pos + 4 : pos + 8])[0]
        body = data[pos + 8 : pos + 8 + length]
        if len(body) != length:
            raise SmfError(f"track {track_idx} truncated")
        pos += 8 + length

        tick = 0
        running = 0
        programs = [0] * 16
        open_notes: dict[tuple[int, int], list[tuple[int, int, int]]] = {}
        p = 0
        while p < len(body):
            delta, p = _read_vlq(body, p)
            tick += delta
            if p >= len(body):
                raise SmfError(f"track {track_idx} ended mid-event")
            status = body[p]
            if status & 0x80:
                p += 1
                if status < 0xF0:
                    running = status
            else:
                if not running & 0x80:
                    raise SmfError(f"data byte {status:#x} without running status")
                status = running

            kind = status & 0xF0
            channel = status & 0x0F
            if kind in (0x80, 0x90):
                pitch, velocity = body[p], body[p + 1]
                p += 2
                key = (channel, pitch)
                if kind == 0x90 and velocity > 0:
                    instrument = DRUM_INSTRUMENT if channel == DRUM_CHANNEL else programs[channel]
                    open_notes.setdefault(key, []).append((tick, velocity, instrument))
                else:
                    queue = open_notes.get(key)
                    if queue:
                        onset, vel, instrument = queue.pop(0)
                        notes.append(
                            Note(
                                onset=onset,
                                track=track_idx if fmt == 1 else 0,
                                pitch=pitch,
                                duration=max(tick - onset, 1),
                                instrument=instrument,
                                velocity=vel,
                            )
                        )
            elif kind in (0xA0, 0xB0, 0xE0):
                p += 2
            elif kind == 0xC0:
                programs[channel] = body[p]
                p += 1
            elif kind == 0xD0:
                p += 1
            elif status == 0xFF:
                meta = body[p]
                length_, p2 = _read_vlq(body, p + 1)
                payload = body[p2 : p2 + length_]
                p = p2 + length_
                if meta == 0x51 and length_ == 3:
                    usec = (payload[0] << 16) | (payload[1] << 8) | payload[2]
                    if usec > 0 and tempo_bpm is None:
                        tempo_bpm = 60_000_000.0 / usec
                elif meta == 0x2F:
                    break
            elif status in (0xF0, 0xF7):
                length_, p2 = _read_vlq(body, p)
                p = p2 + length_
            else:
                raise SmfError(f"unsupported status byte {status:#x}")

        for (channel, pitch), queue in sorted(open_notes.items()):
            for onset, vel, instrument in queue:
                dangling += 1
                notes.append(
                    Note(
                        onset=onset,
                        track=track_idx if fmt == 1 else 0,
                        pitch=pitch,
                        duration=max(tick - onset, 1),
                        instrument=instrument,
                        velocity=vel,
                    )
                )

    if dangling:
        warnings.append(f"{dangling} dangling note-on(s) clamped to track end")
    # In a format-1 file track 0 is the tempo track, so note tracks shift
    # down by one to restore 0-based note-track indices.
    if fmt == 1 and ntrks > 1:
        notes = [
            Note(
                onset=n.onset,
                track=max(n.track - 1, 0),
                pitch=n.pitch,
                duration=n.duration,
                instrument=n.instrument,
                velocity=n.velocity,
            )
            for n in notes
        ]
    return SmfClip(
        notes=sort_notes(notes),
        ticks_per_quarter=division,
        tempo_bpm=tempo_bpm if tempo_bpm is not None else DEFAULT_TEMPO_BPM,
        warnings=warnings,
    )


def _channel_for_track(track: int, warnings: list[str]) -> int:
    if track < len(_NON_DRUM_CHANNELS):
        return _NON_DRUM_CHANNELS[track]
    wrapped = _NON_DRUM_CHANNELS[track % len(_NON_DRUM_CHANNELS)]
    msg = f"track {track} multiplexed onto channel {wrapped}"
    if msg not in warnings:
        warnings.append(msg)
    return wrapped


def write_smf(
    notes: list[Note],
    tempo_bpm: float = DEFAULT_TEMPO_BPM,
    warnings: list[str] | None = None,
) -> bytes:
    """Serialize notes to a type-1 SMF at 480 ticks per quarter.

    Tracks are emitted as one chunk per note-track index in ascending
    order. ``parse_smf(write_smf(notes))`` returns the same notes (sorted)
    when track indices are dense 0..K-1; pitched tracks beyond the 15
    available channels are multiplexed with a warning record.
    """
    if warnings is None:
        warnings = []
    if tempo_bpm <= 0:
        raise SmfError("tempo must be positive")

    by_track: dict[int, list[Note]] = {}
    for n in notes:
        by_track.setdefault(n.track, []).append(n)

    chunks: list[bytes] = []

    usec = int(round(60_000_000.0 / tempo_bpm))
    tempo_track = (
        b"\x00\xff\x51\x03" + struct.pack(">I", usec)[1:] + b"\x00\xff\x58\x04\x04\x02\x18\x08"
    )
    chunks.append(b"MTrk" + struct.pack(">I", len(tempo_track) + 4) + tempo_track + b"\x00\xff\x2f\x00")

    for track in sorted(by_track):
        channel = _channel_for_track(track, warnings)
        # Note-offs sort before ons at a tick; the stable sort keeps each
        # program change immediately before its note-on (same priority).
        events: list[tuple[int, int, bytes]] = []
        program = None
        for n in sort_notes(by_track[track]):
            ch = DRUM_CHANNEL if n.is_drum() else channel
            if not n.is_drum() and n.instrument != program:
                events.append((n.onset, 1, bytes((0xC0 | ch, n.instrument))))
                program = n.instrument
            events.append((n.onset, 1, bytes((0x90 | ch, n.pitch, n.velocity))))
            events.append((n.onset + n.duration, -1, bytes((0x80 | ch, n.pitch, 0))))
        events.sort(key=lambda e: (e[0], e[1]))

        body = bytearray()
        tick = 0
        for ev_tick, _, message in events:
            body += _write_vlq(ev_tick - tick)
            body += message
            tick = ev_tick
        body += b"\x00\xff\x2f\x00"
        chunks.append(b"MTrk" + struct.pack(">I", len(body)) + bytes(body))

    header = b"MThd" + struct.pack(">IHHH", 6, 1, len(chunks), TICKS_PER_QUARTER)
    return header + b"".join(chunks)

"""Synthetic paired corpus with planted, verifiable structure.

Skeleton clips carry periodic direction reversals at the beat period; the
paired MIDI puts a drum hit on every beat and, optionally, a second track
echoing each hit one slot later. Genres are motion archetypes: "smooth"
moves on a cosine, "jerky" on a triangle wave with high-frequency jitter.
Everything is a pure function of the seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..encoder.skeleton import SkeletonSequence, save_clip
from ..midi.notes import DRUM_INSTRUMENT, Note
from ..midi.smf import write_smf
from .corpus import ClipRecord, CorpusManifest, save_manifest, split

KICK = 36
ECHO_PITCH = 60
ECHO_INSTRUMENT = 0  # acoustic grand piano
SLOTS_PER_BEAT = 16  # beats are quarter notes, 64 slots per 4/4 measure


class SyntheticError(ValueError):
    pass


@dataclass(frozen=True)
class SyntheticSpec:
    n_clips: int = 16
    genres: tuple = ("smooth", "jerky")
    beat_period: int = 10  # frames between beats
    frames: int = 200
    joints: int = 8
    echo: bool = True
    seed: int = 0
    fps: int = 20

    def __post_init__(self):
        if self.beat_period < 2:
            raise SyntheticError(f"beat period {self.beat_period} must be >= 2 frames")
        if not self.genres:
            raise SyntheticError("need at least one genre")

    @property
    def bpm(self) -> float:
        return 60.0 * self.fps / self.beat_period

    def beat_frames(self) -> list[int]:
        return list(range(0, self.frames, self.beat_period))


def synth_skeleton(spec: SyntheticSpec, genre: str, clip_seed: int) -> SkeletonSequence:
    """One clip whose joints reverse direction exactly on the beats."""
    gen = np.random.Generator(np.random.PCG64((spec.seed, clip_seed)))
    t = np.arange(spec.frames, dtype=np.float64)
    p = float(spec.beat_period)
    if genre == "smooth":
        # rectified sine: a single sharp turning point on every beat,
        # smooth everywhere else, all joints in phase
        carrier = np.abs(np.sin(np.pi * t / p))
        alternation = np.ones(spec.joints)
    else:
        # triangle wave with spatially alternating direction and tremor
        phase = (t % (2.0 * p)) / (2.0 * p)
        carrier = 1.0 - 4.0 * np.abs(phase - 0.5)
        alternation = (-1.0) ** np.arange(spec.joints)

    amplitude = gen.uniform(0.15, 0.3)
    joint_gain = gen.uniform(0.5, 1.0, size=spec.joints) * alternation
    frames = np.zeros((spec.frames, spec.joints, 3))
    frames[:, :, 1] = np.arange(spec.joints) * 0.1  # resting spine
    frames[:, :, 0] = amplitude * carrier[:, None] * joint_gain[None, :]
    frames[:, :, 2] = 0.3 * amplitude * carrier[:, None] * joint_gain[None, ::-1]
    if genre == "jerky":
        frames[:, :, 0] += 0.05 * amplitude * gen.standard_normal((spec.frames, spec.joints))
    return SkeletonSequence(
        frames=frames, fps=spec.fps, genre=genre, beat_frames=spec.beat_frames()
    )


def synth_notes(spec: SyntheticSpec) -> list[Note]:
    """Drum hits on beats; optional echo track one slot later."""
    from ..midi.notes import TICKS_PER_SLOT

    notes = []
    for k, _frame in enumerate(spec.beat_frames()):
        slot = k * SLOTS_PER_BEAT
        notes.append(
            Note(
                onset=slot * TICKS_PER_SLOT,
                track=0,
                pitch=KICK,
                duration=TICKS_PER_SLOT,
                instrument=DRUM_INSTRUMENT,
            )
        )
        if spec.echo:
            notes.append(
                Note(
                    onset=(slot + 1) * TICKS_PER_SLOT,
                    track=1,
                    pitch=ECHO_PITCH,
                    duration=TICKS_PER_SLOT,
                    instrument=ECHO_INSTRUMENT,
                )
            )
    return notes


def make_synthetic(spec: SyntheticSpec, out_dir) -> CorpusManifest:
    """Write skeletons/, midi/ and manifest.json under ``out_dir``."""
    out = Path(out_dir)
    (out / "skeletons").mkdir(parents=True, exist_ok=True)
    (out / "midi").mkdir(parents=True, exist_ok=True)

    midi_bytes = write_smf(synth_notes(spec), spec.bpm)
    records = []
    for i in range(spec.n_clips):
        genre = spec.genres[i % len(spec.genres)]
        clip_id = f"clip_{i:03d}"
        clip = synth_skeleton(spec, genre, clip_seed=i)
        save_clip(out / "skeletons" / f"{clip_id}.json", clip)
        (out / "midi" / f"{clip_id}.mid").write_bytes(midi_bytes)
        records.append(
            ClipRecord(
                clip_id=clip_id,
                skeleton=f"skeletons/{clip_id}.json",
                midi=f"midi/{clip_id}.mid",
                genre=genre,
            )
        )

    manifest = CorpusManifest(
        clips=split(records, spec.seed),
        seed=spec.seed,
        fps=spec.fps,
        bpm=spec.bpm,
        window=spec.frames,
        stride=spec.frames,
        root=out,
    )
    save_manifest(out / "manifest.json", manifest)
    return manifest

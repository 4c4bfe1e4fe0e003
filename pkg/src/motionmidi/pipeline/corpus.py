"""Corpus manifests, sliding-window sampling, and deterministic splits."""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

SPLITS = ("train", "val", "test")


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class ClipRecord:
    clip_id: str
    skeleton: str
    midi: str
    genre: str
    split: str = "train"


@dataclass
class CorpusManifest:
    clips: list[ClipRecord]
    seed: int = 0
    fps: int = 20
    bpm: float = 120.0
    window: int = 600
    stride: int = 40
    root: Path = field(default_factory=Path)

    def skeleton_path(self, record: ClipRecord) -> Path:
        return self.root / record.skeleton

    def midi_path(self, record: ClipRecord) -> Path:
        return self.root / record.midi

    def by_split(self, split: str) -> list[ClipRecord]:
        return [c for c in self.clips if c.split == split]

    def to_json(self) -> dict:
        return {
            "seed": self.seed,
            "fps": self.fps,
            "bpm": self.bpm,
            "window": self.window,
            "stride": self.stride,
            "clips": [
                {
                    "clip_id": c.clip_id,
                    "skeleton": c.skeleton,
                    "midi": c.midi,
                    "genre": c.genre,
                    "split": c.split,
                }
                for c in self.clips
            ],
        }


def save_manifest(path, manifest: CorpusManifest) -> None:
    Path(path).write_text(json.dumps(manifest.to_json(), indent=1, sort_keys=True))


def load_manifest(path, check_paths: bool = True) -> CorpusManifest:
    path = Path(path)
    blob = json.loads(path.read_text())
    manifest = CorpusManifest(
        clips=[ClipRecord(**c) for c in blob["clips"]],
        seed=int(blob.get("seed", 0)),
        fps=int(blob.get("fps", 20)),
        bpm=float(blob.get("bpm", 120.0)),
        window=int(blob.get("window", 600)),
        stride=int(blob.get("stride", 40)),
        root=path.parent,
    )
    if check_paths:
        for record in manifest.clips:
            for p in (manifest.skeleton_path(record), manifest.midi_path(record)):
                if not p.exists():
                    raise CorpusError(f"manifest entry {record.clip_id}: missing {p}")
    return manifest


def sliding_window(
    frames: int,
    window: int = 600,
    stride: int = 40,
    warnings: list[str] | None = None,
) -> list[tuple[int, int]]:
    """Fixed-size windows starting every ``stride`` frames.

    A clip shorter than one window yields no samples; the shortfall is
    recorded in ``warnings`` when a list is passed.
    """
    if window < 1 or stride < 1:
        raise CorpusError(f"window {window} and stride {stride} must be >= 1")
    if frames < window:
        if warnings is not None:
            warnings.append(f"clip of {frames} frames shorter than window {window}")
        return []
    count = (frames - window) // stride + 1
    return [(i * stride, i * stride + window) for i in range(count)]


def split(records: list[ClipRecord], seed: int) -> list[ClipRecord]:
    """Per-genre 8:1:1 partition under a deterministic seeded shuffle.

    Genres with fewer than three clips stay entirely in train.
    """
    by_genre: dict[str, list[ClipRecord]] = {}
    for record in records:
        by_genre.setdefault(record.genre, []).append(record)

    out: list[ClipRecord] = []
    for genre in sorted(by_genre):
        group = sorted(by_genre[genre], key=lambda c: c.clip_id)
        gen = np.random.Generator(np.random.PCG64((seed, zlib.crc32(genre.encode()))))
        order = gen.permutation(len(group))
        n = len(group)
        n_eval = max(1, round(n / 10)) if n >= 3 else 0
        assignments = ["train"] * n
        for i in range(n_eval):
            assignments[order[i]] = "test"
        for i in range(n_eval, 2 * n_eval):
            assignments[order[i]] = "val"
        out.extend(replace(c, split=s) for c, s in zip(group, assignments))
    return sorted(out, key=lambda c: c.clip_id)

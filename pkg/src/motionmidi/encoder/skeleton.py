"""Skeleton clip i/o, the joint graph, and affine augmentation.

Clip files are JSON:
    {"fps": 20, "joints": J, "frames": [[[x,y,z] * J] * T],
     "genre": "...", "beat_frames": [...]}
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FPS = 20


class SkeletonError(ValueError):
    pass


@dataclass
class SkeletonSequence:
    """T x J x 3 joint coordinates at a fixed frame rate."""

    frames: np.ndarray
    fps: int = FPS
    genre: str | None = None
    beat_frames: list[int] = field(default_factory=list)

    def __post_init__(self):
        self.frames = np.asarray(self.frames, dtype=np.float64)
        if self.frames.ndim != 3 or self.frames.shape[2] != 3:
            raise SkeletonError(f"frames must be T x J x 3, got {self.frames.shape}")
        if self.frames.shape[0] < 1:
            raise SkeletonError("clip must have at least one frame")
        if not np.isfinite(self.frames).all():
            raise SkeletonError("frames contain non-finite values")

    @property
    def n_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def n_joints(self) -> int:
        return self.frames.shape[1]

    def beat_vector(self) -> np.ndarray:
        zb = np.zeros(self.n_frames, dtype=np.float64)
        for f in self.beat_frames:
            if 0 <= f < self.n_frames:
                zb[f] = 1.0
        return zb

    def root_centered(self) -> np.ndarray:
        """Subtract the root joint (index 0) from every frame."""
        return self.frames - self.frames[:, :1, :]


def save_clip(path, clip: SkeletonSequence) -> None:
    blob = {
        "fps": clip.fps,
        "joints": clip.n_joints,
        "frames": clip.frames.tolist(),
        "genre": clip.genre,
        "beat_frames": list(clip.beat_frames),
    }
    Path(path).write_text(json.dumps(blob, sort_keys=True, separators=(",", ":")))


def load_clip(path) -> SkeletonSequence:
    blob = json.loads(Path(path).read_text())
    frames = np.asarray(blob["frames"], dtype=np.float64)
    if blob.get("joints") is not None and frames.shape[1] != blob["joints"]:
        raise SkeletonError(
            f"{path}: joints field {blob['joints']} != frame width {frames.shape[1]}"
        )
    return SkeletonSequence(
        frames=frames,
        fps=int(blob.get("fps", FPS)),
        genre=blob.get("genre"),
        beat_frames=[int(f) for f in blob.get("beat_frames", [])],
    )


@dataclass
class MotionGraph:
    """Undirected joint graph: bones plus self-loops, row-normalized."""

    n_joints: int
    edges: list[tuple[int, int]]

    def __post_init__(self):
        for a, b in self.edges:
            if not (0 <= a < self.n_joints and 0 <= b < self.n_joints):
                raise SkeletonError(f"edge ({a},{b}) outside 0..{self.n_joints - 1}")

    def adjacency(self) -> np.ndarray:
        a = np.eye(self.n_joints)
        for i, j in self.edges:
            a[i, j] = 1.0
            a[j, i] = 1.0
        return a

    def normalized_adjacency(self) -> np.ndarray:
        a = self.adjacency()
        return a / a.sum(axis=1, keepdims=True)

    def permuted(self, perm: np.ndarray) -> "MotionGraph":
        """Relabel joints: node i becomes perm[i]."""
        return MotionGraph(
            n_joints=self.n_joints,
            edges=[(int(perm[i]), int(perm[j])) for i, j in self.edges],
        )


def chain_graph(n_joints: int) -> MotionGraph:
    """Simple spine: joint i bones to i+1. Default for synthetic corpora."""
    return MotionGraph(n_joints=n_joints, edges=[(i, i + 1) for i in range(n_joints - 1)])


def sample_affine(gen: np.random.Generator) -> tuple[np.ndarray, float, np.ndarray]:
    """Random rotation (15 degrees max per axis), scale 0.9-1.1, shift 0.05."""
    angles = gen.uniform(-np.pi / 12, np.pi / 12, size=3)
    scale = float(gen.uniform(0.9, 1.1))
    shift = gen.uniform(-0.05, 0.05, size=3)
    cx, cy, cz = np.cos(angles)
    sx, sy, sz = np.sin(angles)
    rot_x = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    rot_y = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rot_z = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rot_z @ rot_y @ rot_x, scale, shift


def affine_transform(
    frames: np.ndarray, rotation: np.ndarray, scale: float, shift: np.ndarray
) -> np.ndarray:
    """Apply one rigid-plus-scale map to all frames identically."""
    return frames @ rotation.T * scale + shift


def augment_affine(clip: SkeletonSequence, gen: np.random.Generator) -> SkeletonSequence:
    rotation, scale, shift = sample_affine(gen)
    return SkeletonSequence(
        frames=affine_transform(clip.frames, rotation, scale, shift),
        fps=clip.fps,
        genre=clip.genre,
        beat_frames=list(clip.beat_frames),
    )

"""Symbolic-domain beat detection and beat coherence scores.

Beats are read off the quantized onset-density curve: a slot is a beat when
its onset count is a local maximum and at least the mean density over the
clip. Coverage (BCS) is the raw generated/reference beat-count ratio; hit
(BHS) matches beats one-to-one inside a tolerance window; the average score
folds BCS through a symmetric exponential so over- and under-generation
decay alike:

    0.5 * (exp(bcs - 1) + bhs)   when bcs <= 1
    0.5 * (exp(1 - bcs) + bhs)   when bcs >  1
"""
from __future__ import annotations

import numpy as np

from ..midi.notes import Note, TICKS_PER_QUARTER, TICKS_PER_SLOT
from ..midi.smf import DEFAULT_TEMPO_BPM

DEFAULT_TOLERANCE = 0.1  # seconds; two frames at 20 fps


class MetricError(ValueError):
    pass


def ticks_to_seconds(ticks, tempo_bpm: float, ticks_per_quarter: int = TICKS_PER_QUARTER):
    return np.asarray(ticks, dtype=np.float64) * 60.0 / (tempo_bpm * ticks_per_quarter)


def detect_beats(
    notes: list[Note],
    tempo_bpm: float = DEFAULT_TEMPO_BPM,
    ticks_per_quarter: int = TICKS_PER_QUARTER,
    ticks_per_slot: int = TICKS_PER_SLOT,
) -> np.ndarray:
    """Beat times (seconds) from onset density on the slot grid.

    Every detected beat coincides with at least one note onset. Empty input
    gives an empty array.
    """
    if not notes:
        return np.zeros(0, dtype=np.float64)
    slots = np.array([int(n.onset / ticks_per_slot + 0.5) for n in notes], dtype=np.int64)
    n_slots = int(slots.max()) + 1
    density = np.bincount(slots, minlength=n_slots).astype(np.float64)
    mean = density.mean()
    left = np.concatenate([[0.0], density[:-1]])
    right = np.concatenate([density[1:], [0.0]])
    is_beat = (density >= left) & (density >= right) & (density >= mean) & (density > 0)
    beat_slots = np.flatnonzero(is_beat)
    return ticks_to_seconds(beat_slots * ticks_per_slot, tempo_bpm, ticks_per_quarter)


def bcs(gen_beats: np.ndarray, ref_beats: np.ndarray) -> float:
    """Generated/reference beat-count ratio; unclamped, may exceed 1."""
    ref_beats = np.asarray(ref_beats)
    if ref_beats.size == 0:
        raise MetricError("reference beat list is empty")
    return float(len(np.asarray(gen_beats)) / len(ref_beats))


def match_beats(gen_beats: np.ndarray, ref_beats: np.ndarray, tol: float) -> int:
    """Greedy one-to-one matching in time order.

    Each generated beat takes the earliest unused reference beat within
    +/- tol. For sorted 1-d points with a uniform window this greedy rule
    attains the maximum matching.
    """
    gen_sorted = np.sort(np.asarray(gen_beats, dtype=np.float64))
    ref_sorted = np.sort(np.asarray(ref_beats, dtype=np.float64))
    matches = 0
    j = 0
    for g in gen_sorted:
        while j < ref_sorted.size and ref_sorted[j] < g - tol:
            j += 1
        if j < ref_sorted.size and abs(ref_sorted[j] - g) <= tol:
            matches += 1
            j += 1
    return matches


def bhs(gen_beats: np.ndarray, ref_beats: np.ndarray, tol: float = DEFAULT_TOLERANCE) -> float:
    """Fraction of reference beats hit by a generated beat, in [0, 1]."""
    if tol <= 0:
        raise MetricError("tolerance must be positive")
    ref_beats = np.asarray(ref_beats)
    if ref_beats.size == 0:
        raise MetricError("reference beat list is empty")
    return min(match_beats(gen_beats, ref_beats, tol) / ref_beats.size, 1.0)


def bas(bcs_value: float, bhs_value: float) -> float:
    """Beat average score; continuous at bcs = 1, range (0, 1]."""
    if bcs_value < 0:
        raise MetricError(f"bcs {bcs_value} must be >= 0")
    if not 0.0 <= bhs_value <= 1.0:
        raise MetricError(f"bhs {bhs_value} outside [0, 1]")
    if bcs_value <= 1.0:
        return 0.5 * (np.exp(bcs_value - 1.0) + bhs_value)
    return 0.5 * (np.exp(1.0 - bcs_value) + bhs_value)

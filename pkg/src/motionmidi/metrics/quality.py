"""Tonal and rhythmic quality metrics over bars.

Pitch-class histogram entropy: per bar, the 12-bin pitch-class histogram
over all notes is normalized to sum one and scored by Shannon entropy
(base 2, 0*log 0 = 0); the clip value is the mean over non-empty bars.
Percussion keys enter mod 12 like pitches do.

Grooving similarity: per bar, a 64-slot binary onset vector; a pair of bars
scores 1 - popcount(xor)/64 and the clip value is the mean over all
unordered distinct bar pairs.
"""
from __future__ import annotations

import numpy as np

from ..midi.notes import Note, SLOTS_PER_MEASURE, TICKS_PER_MEASURE, TICKS_PER_SLOT
from .beats import MetricError


def bar_of(note: Note, ticks_per_measure: int = TICKS_PER_MEASURE) -> int:
    return note.onset // ticks_per_measure


def pitch_class_histograms(
    notes: list[Note], ticks_per_measure: int = TICKS_PER_MEASURE
) -> list[np.ndarray]:
    """Normalized 12-bin histograms for every non-empty bar, in bar order."""
    if not notes:
        return []
    n_bars = max(bar_of(n, ticks_per_measure) for n in notes) + 1
    counts = np.zeros((n_bars, 12))
    for n in notes:
        counts[bar_of(n, ticks_per_measure), n.pitch % 12] += 1
    histograms = []
    for row in counts:
        total = row.sum()
        if total > 0:
            histograms.append(row / total)
    return histograms


def entropy(histogram: np.ndarray) -> float:
    h = np.asarray(histogram, dtype=np.float64)
    nonzero = h[h > 0]
    return float(-(nonzero * np.log2(nonzero)).sum())


def phe(notes: list[Note], ticks_per_measure: int = TICKS_PER_MEASURE) -> float:
    """Mean per-bar pitch-class entropy over non-empty bars."""
    histograms = pitch_class_histograms(notes, ticks_per_measure)
    if not histograms:
        raise MetricError("no notes in any bar")
    return float(np.mean([entropy(h) for h in histograms]))


def groove_vectors(
    notes: list[Note],
    ticks_per_slot: int = TICKS_PER_SLOT,
    slots_per_measure: int = SLOTS_PER_MEASURE,
) -> np.ndarray:
    """(n_bars, 64) binary onset-position matrix covering bar 0..last."""
    if not notes:
        return np.zeros((0, slots_per_measure))
    slots = np.array([int(n.onset / ticks_per_slot + 0.5) for n in notes], dtype=np.int64)
    bars = slots // slots_per_measure
    vectors = np.zeros((int(bars.max()) + 1, slots_per_measure))
    vectors[bars, slots % slots_per_measure] = 1.0
    return vectors


def groove_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=bool)
    b = np.asarray(b, dtype=bool)
    if a.shape != b.shape:
        raise MetricError(f"groove vectors differ in shape: {a.shape} vs {b.shape}")
    return float(1.0 - np.logical_xor(a, b).mean())


def gs(notes: list[Note], ticks_per_slot: int = TICKS_PER_SLOT) -> float:
    """Mean pairwise groove similarity over all unordered distinct bar pairs."""
    vectors = groove_vectors(notes, ticks_per_slot)
    nonempty = int((vectors.sum(axis=1) > 0).sum())
    if nonempty < 2:
        raise MetricError(f"need at least 2 non-empty bars, have {nonempty}")
    n = vectors.shape[0]
    scores = [
        groove_similarity(vectors[i], vectors[j])
        for i in range(n)
        for j in range(i + 1, n)
    ]
    return float(np.mean(scores))

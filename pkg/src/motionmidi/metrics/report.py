"""Per-clip metric reports and corpus aggregation."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ..midi.notes import Note
from .beats import DEFAULT_TOLERANCE, MetricError, bas, bcs, bhs, detect_beats, match_beats
from .quality import gs, phe

CSV_COLUMNS = ("clip_id", "Bg", "Bt", "Ba", "BCS", "BHS", "BAS", "PHE", "GS")


@dataclass
class MetricReport:
    clip_id: str
    b_gen: int
    b_total: int
    b_aligned: int
    bcs: float
    bhs: float
    bas: float
    phe: float
    gs: float

    def row(self) -> list:
        return [
            self.clip_id,
            self.b_gen,
            self.b_total,
            self.b_aligned,
            f"{self.bcs:.6f}",
            f"{self.bhs:.6f}",
            f"{self.bas:.6f}",
            f"{self.phe:.6f}",
            f"{self.gs:.6f}",
        ]


def evaluate_pair(
    gen_notes: list[Note],
    ref_notes: list[Note] | None,
    gen_tempo: float,
    ref_tempo: float | None = None,
    dance_beats: np.ndarray | None = None,
    tol: float = DEFAULT_TOLERANCE,
    clip_id: str = "",
) -> MetricReport:
    """Full coherence + quality report for one generated clip.

    Reference beats come from the reference MIDI when given; otherwise the
    dance beat annotation stands in. Quality metrics (PHE, GS) always score
    the generated clip itself; a silent generated clip scores bcs = 0 and
    both quality metrics as 0.
    """
    try:
        gen_beats = detect_beats(gen_notes, gen_tempo)
    except MetricError as err:
        raise MetricError(f"{clip_id}: {err}") from err
    if ref_notes is not None:
        ref_beats = detect_beats(ref_notes, ref_tempo if ref_tempo else gen_tempo)
    elif dance_beats is not None:
        ref_beats = np.asarray(dance_beats, dtype=np.float64)
    else:
        raise MetricError(f"{clip_id}: no reference MIDI and no beat annotation")
    try:
        coverage = bcs(gen_beats, ref_beats)
        hit = bhs(gen_beats, ref_beats, tol)
        aligned = match_beats(gen_beats, ref_beats, tol)
        return MetricReport(
            clip_id=clip_id,
            b_gen=int(len(gen_beats)),
            b_total=int(len(ref_beats)),
            b_aligned=int(aligned),
            bcs=coverage,
            bhs=hit,
            bas=bas(coverage, hit),
            phe=phe(gen_notes) if gen_notes else 0.0,
            gs=gs(gen_notes) if gen_notes else 0.0,
        )
    except MetricError as err:
        raise MetricError(f"{clip_id}: {err}") from err


def corpus_mean(reports: list[MetricReport]) -> MetricReport:
    if not reports:
        raise MetricError("no reports to average")
    return MetricReport(
        clip_id="mean",
        b_gen=int(np.sum([r.b_gen for r in reports])),
        b_total=int(np.sum([r.b_total for r in reports])),
        b_aligned=int(np.sum([r.b_aligned for r in reports])),
        bcs=float(np.mean([r.bcs for r in reports])),
        bhs=float(np.mean([r.bhs for r in reports])),
        bas=float(np.mean([r.bas for r in reports])),
        phe=float(np.mean([r.phe for r in reports])),
        gs=float(np.mean([r.gs for r in reports])),
    )


def write_csv(path, reports: list[MetricReport], include_mean: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for report in reports:
            writer.writerow(report.row())
        if include_mean and reports:
            writer.writerow(corpus_mean(reports).row())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))

"""Headless figure rendering next to the delimited outputs.

Every report path that writes a CSV can also drop PNG figures alongside;
rendering is Agg-only and deterministic (no timestamps in PNG metadata).
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_SAVE_KW = {"dpi": 110, "metadata": {"Software": "motionmidi"}}


def save_loss_curve(steps, losses, path, title: str = "training loss") -> None:
    fig, ax = plt.subplots(figsize=(6, 3.2))
    ax.plot(steps, losses, lw=1.0)
    ax.set_xlabel("step")
    ax.set_ylabel("loss")
    ax.set_title(title)
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_metric_bars(reports, path) -> None:
    """Grouped per-clip bars for the three beat-coherence scores."""
    labels = [r.clip_id for r in reports]
    x = np.arange(len(labels))
    width = 0.27
    fig, ax = plt.subplots(figsize=(max(6, 0.6 * len(labels) + 2), 3.4))
    ax.bar(x - width, [r.bcs for r in reports], width, label="BCS")
    ax.bar(x, [r.bhs for r in reports], width, label="BHS")
    ax.bar(x + width, [r.bas for r in reports], width, label="BAS")
    ax.set_xticks(x)
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=7)
    ax.set_ylabel("score")
    ax.axhline(1.0, color="gray", lw=0.6, ls="--")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_beat_raster(pairs, path) -> None:
    """Generated vs reference beat times, one row pair per clip.

    ``pairs`` is a list of (clip_id, gen_beats, ref_beats).
    """
    fig, ax = plt.subplots(figsize=(7, 0.7 * max(len(pairs), 1) + 1.2))
    ticks, labels = [], []
    for i, (clip_id, gen_beats, ref_beats) in enumerate(pairs):
        y = len(pairs) - 1 - i
        ax.vlines(np.asarray(ref_beats), y + 0.05, y + 0.42, color="tab:blue", lw=1.2)
        ax.vlines(np.asarray(gen_beats), y + 0.52, y + 0.9, color="tab:red", lw=1.2)
        ticks.append(y + 0.5)
        labels.append(clip_id)
    ax.set_yticks(ticks)
    ax.set_yticklabels(labels, fontsize=7)
    ax.set_xlabel("seconds (blue: reference, red: generated)")
    ax.set_ylim(0, max(len(pairs), 1))
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_histogram(values, path, title: str, xlabel: str) -> None:
    values = np.asarray(list(values))
    fig, ax = plt.subplots(figsize=(5, 3))
    if values.size:
        bins = np.arange(values.min(), values.max() + 2) - 0.5
        ax.hist(values, bins=bins, rwidth=0.9)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def write_loss_csv(path, rows: list[dict]) -> None:
    """rows: dicts with a 'step' key plus loss component columns."""
    import csv

    if not rows:
        return
    columns = list(rows[0].keys())
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: (f"{v:.10g}" if isinstance(v, float) else v) for k, v in row.items()})


def loss_outputs(ckpt_path) -> tuple[Path, Path]:
    base = Path(ckpt_path)
    return base.with_suffix(base.suffix + ".loss.csv"), base.with_suffix(base.suffix + ".loss.png")

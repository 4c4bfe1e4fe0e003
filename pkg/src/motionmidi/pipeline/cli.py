"""Command-line interface.

Subcommands: tokenize, detokenize, make-synth, split, train-style,
train-drum, train-bert, generate, complete, evaluate, gradcheck, stats.
Exit codes: 0 success, 1 runtime failure, 2 usage error. Every subcommand
is deterministic given its --seed; training subcommands write a per-step
loss CSV and a rendered loss curve next to the checkpoint.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from ..bert.model import BertConfig
from ..drum.generate import Sampler
from ..drum.model import DrumConfig
from ..encoder.networks import EncoderConfig
from ..encoder.skeleton import load_clip
from ..midi.smf import parse_smf, write_smf
from ..midi.tokens import decode, encode, tokens_from_text, tokens_to_text
from ..midi.notes import quantize
from ..nn.optim import Schedule
from . import figures
from .config import load_config, merged
from .corpus import load_manifest, save_manifest, split as split_records
from .synthetic import SyntheticSpec, make_synthetic
from .train import (
    complete_driver,
    generate_from_skeleton,
    load_bert_bundle,
    load_drum_bundle,
    load_style_bundle,
    save_bert_bundle,
    save_drum_bundle,
    save_style_bundle,
    train_bert_driver,
    train_drum_driver,
    train_style_driver,
)

_RUNTIME_ERRORS = (ValueError, OSError, KeyError, RuntimeError, FloatingPointError)


def _manifest_path(corpus: str) -> Path:
    path = Path(corpus)
    return path / "manifest.json" if path.is_dir() else path


def _schedule(cfg: dict) -> Schedule:
    return Schedule(peak=float(cfg.get("lr_peak", 1e-2)), warmup=int(cfg.get("warmup", 20)))


def _encoder_config(cfg: dict, n_genres: int) -> EncoderConfig:
    base = EncoderConfig.desk(d_model=int(cfg.get("d_model", 64)), n_genres=n_genres)
    if "stgcn_channels" in cfg:
        channels = tuple(int(c) for c in str(cfg["stgcn_channels"]).split(","))
        base = EncoderConfig(**{**base.to_json(), "stgcn_channels": channels})
    return base


def _drum_config(cfg: dict) -> DrumConfig:
    return DrumConfig(
        d_model=int(cfg.get("d_model", 64)),
        n_heads=int(cfg.get("heads", 4)),
        n_blocks=int(cfg.get("blocks", 2)),
        d_ff=int(cfg.get("ff", 128)),
        enc_blocks=int(cfg.get("enc_blocks", 1)),
        rel_clip=int(cfg.get("rel_clip", 128)),
        max_len=int(cfg.get("max_len", 512)),
    )


def _bert_config(cfg: dict) -> BertConfig:
    return BertConfig(
        hidden=int(cfg.get("hidden", 64)),
        n_heads=int(cfg.get("heads", 4)),
        n_layers=int(cfg.get("layers", 2)),
        d_ff=int(cfg.get("ff", 128)),
        rel_clip=int(cfg.get("rel_clip", 128)),
        max_len=int(cfg.get("max_len", 1024)),
    )


def _training_log(ckpt_path, rows, title):
    csv_path, png_path = figures.loss_outputs(ckpt_path)
    figures.write_loss_csv(csv_path, rows)
    figures.save_loss_curve([r["step"] for r in rows], [r["loss"] for r in rows], png_path, title)


# ---------------------------------------------------------------- commands

def cmd_tokenize(args) -> int:
    clip = parse_smf(Path(args.midi).read_bytes())
    text = tokens_to_text(encode(quantize(clip.notes)))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_detokenize(args) -> int:
    tokens = tokens_from_text(Path(args.tokens).read_text())
    notes = decode(tokens).to_notes()
    Path(args.out).write_bytes(write_smf(notes, args.bpm))
    return 0


def cmd_make_synth(args) -> int:
    spec = SyntheticSpec(
        n_clips=args.clips,
        genres=tuple(args.genres.split(",")),
        beat_period=args.beat_period,
        frames=args.frames,
        joints=args.joints,
        echo=not args.no_echo,
        seed=args.seed,
    )
    manifest = make_synthetic(spec, args.out)
    counts = {s: len(manifest.by_split(s)) for s in ("train", "val", "test")}
    print(f"wrote {len(manifest.clips)} clips to {args.out} (splits: {counts})")
    return 0


def cmd_split(args) -> int:
    manifest = load_manifest(_manifest_path(args.manifest))
    manifest.clips = split_records(manifest.clips, args.seed)
    manifest.seed = args.seed
    out = Path(args.out) if args.out else _manifest_path(args.manifest)
    save_manifest(out, manifest)
    print(f"split {len(manifest.clips)} clips -> {out}")
    return 0


def cmd_train_style(args) -> int:
    cfg = merged({}, load_config(args.config) if args.config else None)
    manifest = load_manifest(_manifest_path(args.corpus))
    genres = sorted({c.genre for c in manifest.clips})
    enc_cfg = _encoder_config(cfg, n_genres=len(genres))
    store, rows, accuracy = train_style_driver(
        manifest,
        steps=args.steps,
        seed=args.seed,
        enc_cfg=enc_cfg,
        batch_size=int(cfg.get("batch_size", 8)),
        augment=bool(cfg.get("augment", True)),
        schedule=_schedule(cfg),
    )
    save_style_bundle(args.out, store, enc_cfg, genres, step=args.steps, accuracy=accuracy)
    _training_log(args.out, rows, "style classifier loss")
    print(f"style checkpoint -> {args.out} (held-out accuracy {accuracy:.3f})")
    return 0


def cmd_train_drum(args) -> int:
    cfg = merged({}, load_config(args.config) if args.config else None)
    manifest = load_manifest(_manifest_path(args.corpus))
    genres = sorted({c.genre for c in manifest.clips})
    style_store = None
    if args.style_ckpt:
        style_store, style_cfg, _ = load_style_bundle(args.style_ckpt)
        enc_cfg = style_cfg
    else:
        enc_cfg = _encoder_config(cfg, n_genres=len(genres))
    drum_cfg = _drum_config({**cfg, "d_model": enc_cfg.d_model})
    store, vocab, rows = train_drum_driver(
        manifest,
        steps=args.steps,
        seed=args.seed,
        enc_cfg=enc_cfg,
        drum_cfg=drum_cfg,
        style_store=style_store,
        batch_size=int(cfg.get("batch_size", 4)),
        augment=bool(cfg.get("augment", False)),
        beat_weight=float(cfg.get("beat_weight", 1.0)),
        schedule=_schedule(cfg),
    )
    save_drum_bundle(args.out, store, enc_cfg, drum_cfg, vocab, manifest, step=args.steps)
    _training_log(args.out, rows, "drum generator loss")
    print(f"drum checkpoint -> {args.out} (final loss {rows[-1]['loss']:.4f})")
    return 0


def cmd_train_bert(args) -> int:
    cfg = merged({}, load_config(args.config) if args.config else None)
    manifest = load_manifest(_manifest_path(args.corpus))
    bert_cfg = _bert_config(cfg)
    store, vocab, rows, stats = train_bert_driver(
        manifest,
        steps=args.steps,
        seed=args.seed,
        bert_cfg=bert_cfg,
        batch_size=int(cfg.get("batch_size", 4)),
        mask_rate=args.mask_rate,
        completion_prob=args.completion_prob,
        schedule=_schedule(cfg),
    )
    save_bert_bundle(args.out, store, bert_cfg, vocab, stats, step=args.steps)
    _training_log(args.out, rows, "masked model loss")
    print(f"bert checkpoint -> {args.out} (final loss {rows[-1]['loss']:.4f})")
    return 0


def cmd_generate(args) -> int:
    store, enc_cfg, drum_cfg, vocab, config = load_drum_bundle(args.ckpt)
    skeleton = load_clip(args.skeleton)
    notes, tokens = generate_from_skeleton(
        store,
        enc_cfg,
        drum_cfg,
        vocab,
        skeleton,
        seed=args.seed,
        sampler=Sampler(temperature=args.temperature, top_k=args.top_k),
        max_measures=args.max_measures,
    )
    bpm = args.bpm if args.bpm else float(config.get("bpm", 120.0))
    Path(args.out).write_bytes(write_smf(notes, bpm))
    print(f"generated {len(notes)} notes ({len(tokens)} tokens) -> {args.out}")
    return 0


def cmd_complete(args) -> int:
    store, bert_cfg, vocab, config = load_bert_bundle(args.ckpt)
    drum_clip = parse_smf(Path(args.drum).read_bytes())
    notes, tokens = complete_driver(
        store,
        bert_cfg,
        vocab,
        config.get("stats", {}),
        drum_clip.notes,
        seed=args.seed,
        sampler=Sampler(temperature=args.temperature, top_k=args.top_k),
    )
    Path(args.out).write_bytes(write_smf(notes, drum_clip.tempo_bpm))
    print(f"completed to {len(notes)} notes -> {args.out}")
    return 0


def cmd_evaluate(args) -> int:
    from ..metrics.report import evaluate_pair, write_csv

    gen_dir = Path(args.gen)
    ref_dir = Path(args.ref) if args.ref else None
    beats_dir = Path(args.beats) if args.beats else None
    gen_files = sorted(gen_dir.glob("*.mid"))
    if not gen_files:
        raise ValueError(f"no .mid files under {gen_dir}")

    reports = []
    raster = []
    for path in gen_files:
        clip_id = path.stem
        gen_clip = parse_smf(path.read_bytes())
        ref_clip = None
        if ref_dir and (ref_dir / path.name).exists():
            ref_clip = parse_smf((ref_dir / path.name).read_bytes())
        dance_beats = None
        if beats_dir and (beats_dir / f"{clip_id}.json").exists():
            skeleton = load_clip(beats_dir / f"{clip_id}.json")
            dance_beats = np.asarray(skeleton.beat_frames, dtype=np.float64) / skeleton.fps
        report = evaluate_pair(
            gen_clip.notes,
            ref_clip.notes if ref_clip else None,
            gen_clip.tempo_bpm,
            ref_clip.tempo_bpm if ref_clip else None,
            dance_beats=dance_beats,
            tol=args.tol,
            clip_id=clip_id,
        )
        reports.append(report)
        if len(raster) < 6:
            from ..metrics.beats import detect_beats

            gen_beats = detect_beats(gen_clip.notes, gen_clip.tempo_bpm)
            ref_beats = (
                detect_beats(ref_clip.notes, ref_clip.tempo_bpm)
                if ref_clip
                else dance_beats
            )
            raster.append((clip_id, gen_beats, ref_beats))

    write_csv(args.out, reports)
    if not args.no_figures:
        base = Path(args.out)
        figures.save_metric_bars(reports, base.with_suffix(".scores.png"))
        figures.save_beat_raster(raster, base.with_suffix(".beats.png"))
    mean = sum(r.bas for r in reports) / len(reports)
    print(f"evaluated {len(reports)} clips -> {args.out} (mean BAS {mean:.4f})")
    return 0


def cmd_gradcheck(args) -> int:
    from .gradchecks import run_gradcheck

    results = run_gradcheck(tol=args.tol, max_elements=args.max_elements)
    failed = 0
    for r in results:
        status = "PASS" if r.ok else "FAIL"
        print(f"{status}  {r.name:28s} max rel err {r.max_rel_err:.3e} (tol {r.tolerance:g})")
        failed += 0 if r.ok else 1
    if failed:
        print(f"{failed} suite(s) failed")
        return 1
    print(f"all {len(results)} gradient suites passed")
    return 0


def cmd_stats(args) -> int:
    from .train import corpus_note_stats, load_clips

    manifest = load_manifest(_manifest_path(args.corpus))
    clips = load_clips(manifest)
    sequences = [c.full_tokens for c in clips]
    stats = corpus_note_stats(sequences)
    from ..bert.complete import split_measures

    notes_per_measure = []
    for seq in sequences:
        for measure in split_measures(seq):
            notes_per_measure.append(sum(1 for t in measure if t.is_pitch()))
    blob = {
        "clips": len(clips),
        "genres": sorted({c.record.genre for c in clips}),
        "instruments": sorted(
            {t.instrument for seq in sequences for t in seq if t.is_pitch()}
        ),
        "notes_per_measure_mean": float(np.mean(notes_per_measure)) if notes_per_measure else 0.0,
        "tracks": stats,
    }
    Path(args.out).write_text(json.dumps(blob, indent=1, sort_keys=True))
    if not args.no_figures:
        figures.save_histogram(
            notes_per_measure,
            Path(args.out).with_suffix(".notes.png"),
            "notes per measure",
            "notes",
        )
    print(f"stats for {len(clips)} clips -> {args.out}")
    return 0


# ---------------------------------------------------------------- parser

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="motionmidi",
        description="Skeleton-conditioned multi-track MIDI generation toolkit.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tokenize", help="MIDI file to quad-token text")
    p.add_argument("midi")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_tokenize)

    p = sub.add_parser("detokenize", help="quad-token text back to MIDI")
    p.add_argument("tokens")
    p.add_argument("--out", required=True)
    p.add_argument("--bpm", type=float, default=120.0)
    p.set_defaults(fn=cmd_detokenize)

    p = sub.add_parser("make-synth", help="write a synthetic paired corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--clips", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--frames", type=int, default=200)
    p.add_argument("--beat-period", type=int, default=10)
    p.add_argument("--joints", type=int, default=8)
    p.add_argument("--genres", default="smooth,jerky")
    p.add_argument("--no-echo", action="store_true")
    p.set_defaults(fn=cmd_make_synth)

    p = sub.add_parser("split", help="reassign train/val/test splits")
    p.add_argument("--manifest", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_split)

    for name, fn in (("train-style", cmd_train_style), ("train-drum", cmd_train_drum), ("train-bert", cmd_train_bert)):
        p = sub.add_parser(name, help=f"{name.replace('-', ' ')} on a corpus")
        p.add_argument("--corpus", required=True)
        p.add_argument("--steps", type=int, required=True)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", required=True)
        p.add_argument("--config")
        if name == "train-drum":
            p.add_argument("--style-ckpt")
        if name == "train-bert":
            p.add_argument("--mask-rate", type=float, default=0.15)
            p.add_argument("--completion-prob", type=float, default=0.5)
        p.set_defaults(fn=fn)

    p = sub.add_parser("generate", help="drum track from a skeleton clip")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--skeleton", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--temperature", type=float, default=1.0)
    p.add_argument("--top-k", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--max-measures", type=int, default=8)
    p.add_argument("--bpm", type=float)
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("complete", help="fill remaining tracks around a drum MIDI")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--drum", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--temperature", type=float, default=0.0)
    p.add_argument("--top-k", type=int, default=16)
    p.set_defaults(fn=cmd_complete)

    p = sub.add_parser("evaluate", help="score generated clips against references")
    p.add_argument("--gen", required=True)
    p.add_argument("--ref")
    p.add_argument("--beats")
    p.add_argument("--tol", type=float, default=0.1)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("gradcheck", help="finite-difference gradient suites")
    p.add_argument("--tol", type=float, default=1e-5)
    p.add_argument("--max-elements", type=int, default=40)
    p.set_defaults(fn=cmd_gradcheck)

    p = sub.add_parser("stats", help="corpus token statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_stats)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        return args.fn(args)
    except _RUNTIME_ERRORS as err:
        print(f"{type(err).__module__}.{type(err).__name__}: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

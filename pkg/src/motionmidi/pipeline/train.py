"""Training, generation, and completion drivers behind the CLI."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bert.complete import Scaffold, TrackPlan, complete_tracks, split_measures
from ..bert.model import BertConfig, init_bert, train_step_bert
from ..drum.generate import Sampler, generate
from ..drum.model import (
    DrumConfig,
    drum_forward,
    drum_loss,
    encode_condition,
    field_weights,
    init_drum_model,
    teacher_forcing_batch,
)
from ..encoder.networks import (
    EncoderConfig,
    beat_head,
    beat_loss,
    beats_from_logits,
    fuse,
    init_beat_head,
    init_fuse,
    init_stgcn,
    init_style,
    stgcn_forward,
    style_forward,
    style_loss,
)
from ..encoder.skeleton import MotionGraph, SkeletonSequence, augment_affine, chain_graph, load_clip
from ..midi.notes import DRUM_INSTRUMENT, Note, quantize
from ..midi.smf import parse_smf
from ..midi.tokens import TokenQuad, decode, encode
from ..midi.vocab import Vocab, build_vocab
from ..nn import AdamState, ParamStore, Schedule, Tensor, adam_step, backward, rng
from ..nn.checkpoint import load_checkpoint, save_checkpoint
from .corpus import ClipRecord, CorpusManifest

DESK_SCHEDULE = Schedule(peak=1e-2, warmup=20)


@dataclass
class LoadedClip:
    record: ClipRecord
    skeleton: SkeletonSequence
    notes: list[Note]
    tempo_bpm: float
    drum_tokens: list[TokenQuad]
    full_tokens: list[TokenQuad]


def drum_tokens_of(notes: list[Note]) -> list[TokenQuad]:
    drums = [n for n in notes if n.is_drum()]
    return encode(quantize(drums))


def full_tokens_of(notes: list[Note]) -> list[TokenQuad]:
    return encode(quantize(notes))


def load_clips(manifest: CorpusManifest, splits=("train", "val", "test")) -> list[LoadedClip]:
    out = []
    for record in manifest.clips:
        if record.split not in splits:
            continue
        skeleton = load_clip(manifest.skeleton_path(record))
        smf = parse_smf(manifest.midi_path(record).read_bytes())
        out.append(
            LoadedClip(
                record=record,
                skeleton=skeleton,
                notes=smf.notes,
                tempo_bpm=smf.tempo_bpm,
                drum_tokens=drum_tokens_of(smf.notes),
                full_tokens=full_tokens_of(smf.notes),
            )
        )
    return out


def genre_labels(manifest: CorpusManifest) -> list[str]:
    return sorted({c.genre for c in manifest.clips})


def _batch_frames(clips: list[LoadedClip], idxs, gen, augment: bool) -> np.ndarray:
    frames = []
    for i in idxs:
        clip = clips[i].skeleton
        if augment:
            clip = augment_affine(clip, gen)
        frames.append(SkeletonSequence(clip.frames, clip.fps, clip.genre, clip.beat_frames).root_centered())
    return np.stack(frames)


def _epoch_batches(n: int, batch_size: int, gen):
    """Endless minibatch index stream: shuffled epochs, no replacement."""
    batch_size = min(batch_size, n)
    while True:
        order = gen.permutation(n)
        for start in range(0, n - batch_size + 1, batch_size):
            yield order[start : start + batch_size]


# ---------------------------------------------------------------- style

def train_style_driver(
    manifest: CorpusManifest,
    steps: int,
    seed: int,
    enc_cfg: EncoderConfig,
    batch_size: int = 8,
    augment: bool = True,
    schedule: Schedule = DESK_SCHEDULE,
) -> tuple[ParamStore, list[dict], float]:
    """Pretrain the genre classifier; returns (params, loss rows, held-out acc)."""
    clips = load_clips(manifest)
    train = [c for c in clips if c.record.split == "train"]
    heldout = [c for c in clips if c.record.split in ("val", "test")] or train
    if not train:
        raise ValueError("no training clips in manifest")
    genres = genre_labels(manifest)
    labels = {c.record.clip_id: genres.index(c.record.genre) for c in clips}
    graph = chain_graph(train[0].skeleton.n_joints)

    gen = rng(seed)
    store = ParamStore()
    init_style(store, gen, enc_cfg)
    opt = AdamState()
    rows = []
    batches = _epoch_batches(len(train), batch_size, gen)
    for t in range(1, steps + 1):
        idxs = next(batches)
        x = _batch_frames(train, idxs, gen, augment)
        y = np.array([labels[train[i].record.clip_id] for i in idxs])
        _, logits = style_forward(store, x, graph, enc_cfg)
        loss = style_loss(logits, y)
        grads, _ = backward(loss, store)
        adam_step(store, grads, opt, t, schedule)
        rows.append({"step": t, "loss": loss.item()})

    correct = 0
    for c in heldout:
        x = c.skeleton.root_centered()[None]
        _, logits = style_forward(store, x, graph, enc_cfg)
        correct += int(np.argmax(logits.data[0]) == labels[c.record.clip_id])
    accuracy = correct / len(heldout)
    return store, rows, accuracy


# ---------------------------------------------------------------- beat head

def train_beat_driver(
    manifest: CorpusManifest,
    steps: int,
    seed: int,
    enc_cfg: EncoderConfig,
    batch_size: int = 4,
    augment: bool = True,
    schedule: Schedule = DESK_SCHEDULE,
) -> tuple[ParamStore, list[dict], float]:
    """Train movement branch + beat head alone; returns held-out frame F1."""
    clips = load_clips(manifest)
    train = [c for c in clips if c.record.split == "train"]
    heldout = [c for c in clips if c.record.split in ("val", "test")] or train
    graph = chain_graph(train[0].skeleton.n_joints)

    gen = rng(seed)
    store = ParamStore()
    init_stgcn(store, gen, enc_cfg)
    init_beat_head(store, gen, enc_cfg)
    opt = AdamState()
    rows = []
    batches = _epoch_batches(len(train), batch_size, gen)
    for t in range(1, steps + 1):
        idxs = next(batches)
        x = _batch_frames(train, idxs, gen, augment)
        zb = np.stack([train[i].skeleton.beat_vector() for i in idxs])
        logits = beat_head(store, stgcn_forward(store, x, graph, enc_cfg), enc_cfg)
        loss = beat_loss(logits, zb)
        grads, _ = backward(loss, store)
        adam_step(store, grads, opt, t, schedule)
        rows.append({"step": t, "loss": loss.item()})

    f1 = heldout_beat_f1(store, enc_cfg, graph, heldout)
    return store, rows, f1


def heldout_beat_f1(store, enc_cfg, graph, clips: list[LoadedClip]) -> float:
    tp = fp = fn = 0
    for c in clips:
        x = c.skeleton.root_centered()[None]
        logits = beat_head(store, stgcn_forward(store, x, graph, enc_cfg), enc_cfg)
        pred = beats_from_logits(logits)[0]
        true = c.skeleton.beat_vector()
        tp += int(((pred == 1) & (true == 1)).sum())
        fp += int(((pred == 1) & (true == 0)).sum())
        fn += int(((pred == 0) & (true == 1)).sum())
    if tp == 0:
        return 0.0
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    return 2 * precision * recall / (precision + recall)


# ---------------------------------------------------------------- drum

def train_drum_driver(
    manifest: CorpusManifest,
    steps: int,
    seed: int,
    enc_cfg: EncoderConfig,
    drum_cfg: DrumConfig,
    style_store: ParamStore | None = None,
    batch_size: int = 4,
    augment: bool = False,
    beat_weight: float = 1.0,
    schedule: Schedule = DESK_SCHEDULE,
) -> tuple[ParamStore, Vocab, list[dict]]:
    """Joint loop: beat supervision plus teacher-forced drum decoding.

    The conditioning uses ground-truth beats during training (the beat head
    learns from its own loss term); the frozen style branch contributes a
    detached embedding. Returns the trained store (style weights copied in
    under their own prefix), the drum vocabulary, and the loss log.
    """
    clips = load_clips(manifest)
    train = [c for c in clips if c.record.split == "train"]
    if not train:
        raise ValueError("no training clips in manifest")
    graph = chain_graph(train[0].skeleton.n_joints)
    vocab = build_vocab([c.drum_tokens for c in train])
    weights = field_weights(vocab)

    gen = rng(seed)
    store = ParamStore()
    init_stgcn(store, gen, enc_cfg)
    init_beat_head(store, gen, enc_cfg)
    init_fuse(store, gen, enc_cfg)
    init_drum_model(store, gen, drum_cfg, vocab)
    if style_store is None:
        style_store = ParamStore()
        init_style(style_store, rng(seed + 1), enc_cfg)

    # the style branch is frozen, so its per-clip embedding is a constant
    style_cache = None
    if not augment:
        frames_all = np.stack([c.skeleton.root_centered() for c in train])
        style_cache, _ = style_forward(style_store, frames_all, graph, enc_cfg)
        style_cache = style_cache.data

    opt = AdamState()
    rows = []
    batches = _epoch_batches(len(train), batch_size, gen)
    for t in range(1, steps + 1):
        idxs = next(batches)
        x = _batch_frames(train, idxs, gen, augment)
        zb_true = np.stack([train[i].skeleton.beat_vector() for i in idxs])
        sequences = [train[i].drum_tokens for i in idxs]

        zm = stgcn_forward(store, x, graph, enc_cfg)
        blogits = beat_head(store, zm, enc_cfg)
        loss_beat = beat_loss(blogits, zb_true)

        if style_cache is not None:
            zs_data = style_cache[np.asarray(idxs)]
        else:
            zs, _ = style_forward(style_store, Tensor(x), graph, enc_cfg)
            zs_data = zs.data
        z = fuse(store, zb_true, Tensor(zs_data))
        memory = encode_condition(store, drum_cfg, z)
        inputs, groups, targets, mask = teacher_forcing_batch(vocab, sequences)
        logits = drum_forward(store, drum_cfg, inputs, groups, memory, vocab)
        loss_drum = drum_loss(logits, targets, mask, weights)

        loss = loss_drum + loss_beat * beat_weight
        grads, _ = backward(loss, store)
        adam_step(store, grads, opt, t, schedule)
        rows.append(
            {
                "step": t,
                "loss": loss.item(),
                "loss_drum": loss_drum.item(),
                "loss_beat": loss_beat.item(),
            }
        )

    merged = ParamStore()
    merged.load_state_dict(store.state_dict())
    merged.load_state_dict(style_store.state_dict())
    return merged, vocab, rows


def build_condition(
    store: ParamStore,
    enc_cfg: EncoderConfig,
    skeleton: SkeletonSequence,
    graph: MotionGraph | None = None,
    beats: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Conditioning matrix (T, d_model) for one clip; returns (Z, beat seq).

    Beats come from the trained beat head unless an explicit binary vector
    is supplied.
    """
    if graph is None:
        graph = chain_graph(skeleton.n_joints)
    x = skeleton.root_centered()[None]
    zm = stgcn_forward(store, x, graph, enc_cfg)
    zb = beats[None] if beats is not None else beats_from_logits(beat_head(store, zm, enc_cfg))
    zs, _ = style_forward(store, x, graph, enc_cfg)
    z = fuse(store, zb, Tensor(zs.data))
    return z.data[0], np.asarray(zb[0])


def generate_from_skeleton(
    store: ParamStore,
    enc_cfg: EncoderConfig,
    drum_cfg: DrumConfig,
    vocab: Vocab,
    skeleton: SkeletonSequence,
    seed: int,
    sampler: Sampler = Sampler(),
    max_measures: int = 8,
    bpm: float = 120.0,
) -> tuple[list[Note], list[TokenQuad]]:
    z, _ = build_condition(store, enc_cfg, skeleton)
    tokens = generate(store, drum_cfg, vocab, z, rng(seed), sampler, max_measures)
    notes = decode(tokens).to_notes()
    return notes, tokens


# ---------------------------------------------------------------- bert

def corpus_note_stats(sequences: list[list[TokenQuad]]) -> dict:
    """Per non-drum (track, instrument): histograms feeding scaffold sampling."""
    stats: dict[tuple[int, int], dict[str, list[int]]] = {}
    for seq in sequences:
        for measure in split_measures(seq):
            per_track: dict[tuple[int, int], list[int]] = {}
            current: dict[tuple[int, int], int] = {}
            for tok in measure:
                if tok.is_position():
                    for key, count in current.items():
                        per_track.setdefault(key, []).append(count)
                    current = {}
                elif tok.is_pitch() and tok.instrument != DRUM_INSTRUMENT:
                    key = (tok.track, tok.instrument)
                    current[key] = current.get(key, 0) + 1
            for key, count in current.items():
                per_track.setdefault(key, []).append(count)
            for key, counts in per_track.items():
                entry = stats.setdefault(key, {"positions_per_measure": [], "pitches_per_position": []})
                entry["positions_per_measure"].append(len(counts))
                entry["pitches_per_position"].extend(counts)
    return {f"{k[0]}:{k[1]}": v for k, v in stats.items()}


def train_bert_driver(
    manifest: CorpusManifest,
    steps: int,
    seed: int,
    bert_cfg: BertConfig,
    batch_size: int = 4,
    mask_rate: float = 0.15,
    completion_prob: float = 0.5,
    schedule: Schedule = DESK_SCHEDULE,
) -> tuple[ParamStore, Vocab, list[dict], dict]:
    clips = load_clips(manifest)
    train = [c for c in clips if c.record.split == "train"]
    if not train:
        raise ValueError("no training clips in manifest")
    sequences = [c.full_tokens for c in train]
    vocab = build_vocab(sequences)
    stats = corpus_note_stats(sequences)

    gen = rng(seed)
    store = ParamStore()
    init_bert(store, gen, bert_cfg, vocab)
    opt = AdamState()
    rows = []
    batches = _epoch_batches(len(sequences), batch_size, gen)
    for t in range(1, steps + 1):
        idxs = next(batches)
        batch = [sequences[i] for i in idxs]
        loss = train_step_bert(
            store, bert_cfg, batch, vocab, opt, t, gen,
            mask_rate=mask_rate, schedule=schedule, completion_prob=completion_prob,
        )
        rows.append({"step": t, "loss": loss})
    return store, vocab, rows, stats


def scaffold_from_stats(stats: dict, n_measures: int, gen: np.random.Generator) -> Scaffold:
    """Sample per-measure plans from the stored corpus histograms."""
    scaffold: Scaffold = []
    keys = sorted(stats)
    for _ in range(n_measures):
        plans = []
        for key in keys:
            track, instrument = (int(v) for v in key.split(":"))
            entry = stats[key]
            positions = entry["positions_per_measure"]
            pitches = entry["pitches_per_position"]
            n_positions = int(positions[int(gen.integers(len(positions)))]) if positions else 0
            counts = tuple(
                int(pitches[int(gen.integers(len(pitches)))]) if pitches else 1
                for _ in range(n_positions)
            )
            if counts:
                plans.append(TrackPlan(track=track, instrument=instrument, pitch_counts=counts))
        scaffold.append(plans)
    return scaffold


def complete_driver(
    store: ParamStore,
    bert_cfg: BertConfig,
    vocab: Vocab,
    stats: dict,
    drum_notes: list[Note],
    seed: int,
    sampler: Sampler = Sampler(temperature=0.0),
) -> tuple[list[Note], list[TokenQuad]]:
    """Complete non-drum tracks for a drum-only MIDI using sampled scaffolds."""
    tokens = drum_tokens_of(drum_notes)
    n_measures = len(split_measures(tokens)) if tokens else 0
    gen = rng(seed)
    scaffold = scaffold_from_stats(stats, n_measures, gen)
    full = complete_tracks(store, bert_cfg, vocab, tokens, scaffold, gen, sampler)
    return decode(full).to_notes(), full


# ---------------------------------------------------------------- checkpoints

def save_drum_bundle(path, store, enc_cfg, drum_cfg, vocab, manifest, step, opt=None):
    config = {
        "kind": "drum",
        "encoder": enc_cfg.to_json(),
        "drum": drum_cfg.to_json(),
        "vocab": vocab.to_json(),
        "bpm": manifest.bpm,
        "fps": manifest.fps,
    }
    save_checkpoint(path, store, step=step, config=config, opt=opt)


def load_drum_bundle(path):
    store, step, config, opt = load_checkpoint(path)
    if config.get("kind") != "drum":
        raise ValueError(f"{path} is not a drum checkpoint")
    return (
        store,
        EncoderConfig.from_json(config["encoder"]),
        DrumConfig.from_json(config["drum"]),
        Vocab.from_json(config["vocab"]),
        config,
    )


def save_bert_bundle(path, store, bert_cfg, vocab, stats, step, opt=None):
    config = {
        "kind": "bert",
        "bert": bert_cfg.to_json(),
        "vocab": vocab.to_json(),
        "stats": stats,
    }
    save_checkpoint(path, store, step=step, config=config, opt=opt)


def load_bert_bundle(path):
    store, step, config, opt = load_checkpoint(path)
    if config.get("kind") != "bert":
        raise ValueError(f"{path} is not a bert checkpoint")
    return store, BertConfig.from_json(config["bert"]), Vocab.from_json(config["vocab"]), config


def save_style_bundle(path, store, enc_cfg, genres, step, accuracy):
    config = {
        "kind": "style",
        "encoder": enc_cfg.to_json(),
        "genres": list(genres),
        "accuracy": accuracy,
    }
    save_checkpoint(path, store, step=step, config=config)


def load_style_bundle(path):
    store, step, config, opt = load_checkpoint(path)
    if config.get("kind") != "style":
        raise ValueError(f"{path} is not a style checkpoint")
    return store, EncoderConfig.from_json(config["encoder"]), config

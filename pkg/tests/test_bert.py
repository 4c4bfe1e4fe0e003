"""Masked model: masking statistics, bidirectionality, loss, completion."""
import numpy as np
import pytest

from motionmidi.bert import (
    BertConfig,
    MaskingError,
    TrackPlan,
    bert_forward,
    build_completion,
    complete_tracks,
    extract_track,
    init_bert,
    measure_index,
    measure_mask,
    non_drum_tracks,
    pad_batch,
    split_measures,
    track_completion_example,
    train_step_bert,
    weighted_loss,
)
from motionmidi.drum.generate import Sampler
from motionmidi.drum.model import sequence_ids
from motionmidi.midi import (
    DRUM_INSTRUMENT,
    MASK,
    Note,
    PAD,
    TokenQuad,
    build_vocab,
    decode,
    encode,
    quantize,
)
from motionmidi.nn import AdamState, ParamStore, Schedule, rng

CFG = BertConfig.desk(32)


def echo_clip(n_measures=2):
    notes = []
    for m in range(n_measures):
        for b in range(4):
            slot = m * 64 + b * 16
            notes.append(
                Note(onset=slot * 30, track=0, pitch=36, duration=30, instrument=DRUM_INSTRUMENT)
            )
            notes.append(
                Note(onset=(slot + 1) * 30, track=1, pitch=60, duration=30, instrument=0)
            )
    return encode(quantize(notes))


@pytest.fixture(scope="module")
def setup():
    tokens = echo_clip()
    vocab = build_vocab([tokens])
    store = ParamStore()
    init_bert(store, rng(1), CFG, vocab)
    return store, vocab, tokens


class TestMeasureMask:
    def test_field_isolation(self, setup):
        _, vocab, tokens = setup
        for seed in range(40):
            batch = measure_mask(tokens, vocab, rng(seed))
            ids, _ = sequence_ids(vocab, tokens)
            for f in ids:
                if f != batch.mask_field:
                    assert (batch.ids[f] == ids[f]).all(), f"{f} modified"

    def test_masked_positions_span_two_measures(self, setup):
        _, vocab, tokens = setup
        measures = measure_index(tokens)
        for seed in range(1000):
            batch = measure_mask(tokens, vocab, rng(seed))
            hit = {int(m) for m in measures[batch.mask_positions]}
            assert len(hit) >= 2, f"seed {seed} masked only measures {hit}"
            assert not batch.single_measure_fallback

    def test_single_measure_falls_back_with_flag(self, setup):
        _, vocab, _ = setup
        tokens = echo_clip(n_measures=1)
        batch = measure_mask(tokens, vocab, rng(0))
        assert batch.single_measure_fallback
        assert batch.mask_positions.any()

    def test_targets_only_at_masked_positions(self, setup):
        _, vocab, tokens = setup
        batch = measure_mask(tokens, vocab, rng(3))
        assert (batch.targets[~batch.mask_positions] == -1).all()
        assert (batch.targets[batch.mask_positions] >= 0).all()

    def test_deterministic_given_seed(self, setup):
        _, vocab, tokens = setup
        a = measure_mask(tokens, vocab, rng(9))
        b = measure_mask(tokens, vocab, rng(9))
        assert a.mask_field == b.mask_field
        assert (a.mask_positions == b.mask_positions).all()
        for f in a.ids:
            assert (a.ids[f] == b.ids[f]).all()

    def test_replacement_proportions_80_10_10(self):
        """Chi-square over >=1e5 masked tokens at alpha = 0.01.

        The fixture gives every field at least two content values so a
        "random token" draw is always distinguishable from "unchanged".
        """
        gen0 = np.random.Generator(np.random.PCG64(77))
        notes = []
        for m in range(8):
            for b in range(4):
                slot = m * 64 + b * 16
                notes.append(
                    Note(
                        onset=slot * 30,
                        track=0,
                        pitch=int(gen0.choice([36, 38, 41])),
                        duration=int(gen0.choice([30, 60, 90])),
                        instrument=DRUM_INSTRUMENT,
                    )
                )
                notes.append(
                    Note(
                        onset=(slot + 1) * 30,
                        track=1,
                        pitch=int(gen0.choice([60, 64, 67])),
                        duration=int(gen0.choice([30, 60])),
                        instrument=int(gen0.choice([0, 24])),
                    )
                )
        tokens = encode(quantize(notes))
        vocab = build_vocab([tokens])
        ids, _ = sequence_ids(vocab, tokens)
        counts = np.zeros(3)  # mask / random / keep
        gen = rng(123)
        total = 0
        while total < 100_000:
            batch = measure_mask(tokens, vocab, gen, mask_rate=0.3)
            original = ids[batch.mask_field]
            for pos in np.flatnonzero(batch.mask_positions):
                got = batch.ids[batch.mask_field][pos]
                if got == MASK:
                    counts[0] += 1
                elif got == original[pos]:
                    counts[2] += 1
                else:
                    counts[1] += 1
                total += 1
        fractions = counts / total
        assert abs(fractions[0] - 0.8) < 0.01
        assert abs(fractions[1] - 0.1) < 0.005
        assert abs(fractions[2] - 0.1) < 0.005
        expected = total * np.array([0.8, 0.1, 0.1])
        chi2 = ((counts - expected) ** 2 / expected).sum()
        assert chi2 < 9.21  # chi-square 0.01 critical value, 2 dof

    def test_empty_sequence_rejected(self, setup):
        _, vocab, _ = setup
        with pytest.raises(MaskingError):
            measure_mask([], vocab, rng(0))


class TestBertForward:
    def test_bidirectional_context(self, setup):
        """Perturbing a late token moves logits at an early masked position."""
        store, vocab, tokens = setup
        batch = measure_mask(tokens, vocab, rng(5))
        ids = {f: v[None] for f, v in batch.ids.items()}
        base = bert_forward(store, CFG, ids, batch.pos_groups[None])
        mutated = {f: v.copy() for f, v in ids.items()}
        mutated["event"][0, -1] = vocab.tables["event"]["BOM"]
        out = bert_forward(store, CFG, mutated, batch.pos_groups[None])
        first_masked = int(np.flatnonzero(batch.mask_positions)[0])
        delta = np.abs(base["event"].data[0, first_masked] - out["event"].data[0, first_masked])
        assert delta.max() > 1e-9

    def test_single_token_shapes(self, setup):
        store, vocab, _ = setup
        ids = {f: np.array([[PAD]]) for f in ("event", "duration", "track", "instrument")}
        ids["event"] = np.array([[vocab.tables["event"]["BOM"]]])
        out = bert_forward(store, CFG, ids, np.zeros((1, 1), dtype=np.int64))
        for f, logits in out.items():
            assert logits.shape == (1, 1, vocab.sizes[f])
            assert np.isfinite(logits.data).all()

    def test_length_cap(self, setup):
        store, vocab, _ = setup
        n = CFG.max_len + 1
        ids = {f: np.zeros((1, n), dtype=np.int64) for f in ("event", "duration", "track", "instrument")}
        with pytest.raises(ValueError, match="max_len"):
            bert_forward(store, CFG, ids, np.zeros((1, n), dtype=np.int64))


class TestWeightedLoss:
    def test_uniform_logits_closed_form(self, setup):
        _, vocab, tokens = setup
        store = ParamStore()
        init_bert(store, rng(2), CFG, vocab)
        for f in ("event", "duration", "track", "instrument"):
            store[f"bert.head.{f}.w"].data[:] = 0.0
            store[f"bert.head.{f}.b"].data[:] = 0.0
        sizes = vocab.sizes
        total = sum(sizes.values())
        batch = measure_mask(tokens, vocab, rng(7))
        logits = bert_forward(store, CFG, {f: v[None] for f, v in batch.ids.items()}, batch.pos_groups[None])
        loss = weighted_loss(logits, [batch], vocab)
        expected = (sizes[batch.mask_field] / total) * np.log(sizes[batch.mask_field])
        assert loss.item() == pytest.approx(expected, abs=1e-9)

    def test_no_masked_positions_rejected(self, setup):
        store, vocab, tokens = setup
        batch = measure_mask(tokens, vocab, rng(8))
        batch.mask_positions[:] = False
        logits = bert_forward(store, CFG, {f: v[None] for f, v in batch.ids.items()}, batch.pos_groups[None])
        with pytest.raises(MaskingError):
            weighted_loss(logits, [batch], vocab)

    def test_loss_decreases_on_fixed_batch(self, setup):
        _, vocab, tokens = setup
        store = ParamStore()
        init_bert(store, rng(3), CFG, vocab)
        opt = AdamState()
        losses = [
            train_step_bert(
                store, CFG, [tokens], vocab, opt, t, rng(50),
                schedule=Schedule(peak=3e-3, warmup=10),
            )
            for t in range(1, 51)
        ]
        assert losses[-1] < losses[0] * 0.5

    def test_memorizes_eight_short_sequences(self, setup):
        """Masked-token accuracy hits 100% on a small fixed corpus."""
        gen0 = np.random.Generator(np.random.PCG64(31))
        corpus = []
        for _ in range(8):
            notes = [
                Note(
                    onset=(m * 64 + s) * 30,
                    track=0,
                    pitch=int(gen0.choice([36, 40, 45, 50])),
                    duration=30,
                    instrument=DRUM_INSTRUMENT,
                )
                for m in range(2)
                for s in sorted(gen0.choice(64, size=3, replace=False))
            ]
            corpus.append(encode(quantize(notes)))
        vocab = build_vocab(corpus)
        store = ParamStore()
        init_bert(store, rng(32), CFG, vocab)
        opt = AdamState()
        schedule = Schedule(peak=5e-3, warmup=20)
        for t in range(1, 401):
            train_step_bert(store, CFG, corpus, vocab, opt, t, rng(700 + t), schedule=schedule)

        total = correct = 0
        for seq in corpus:
            batch = measure_mask(seq, vocab, rng(900))
            logits = bert_forward(
                store, CFG, {f: v[None] for f, v in batch.ids.items()}, batch.pos_groups[None]
            )
            pred = np.argmax(logits[batch.mask_field].data[0], axis=-1)
            where = np.flatnonzero(batch.mask_positions)
            correct += int((pred[where] == batch.targets[where]).sum())
            total += where.size
        assert correct == total, f"masked accuracy {correct}/{total}"

    def test_deterministic_for_fixed_seed(self, setup):
        _, vocab, tokens = setup

        def run():
            store = ParamStore()
            init_bert(store, rng(4), CFG, vocab)
            opt = AdamState()
            return [
                train_step_bert(store, CFG, [tokens], vocab, opt, t, rng(60 + t))
                for t in range(1, 6)
            ]

        assert run() == run()


class TestCompletion:
    def test_extract_track_plans_match_truth(self, setup):
        _, _, tokens = setup
        base, scaffold, truth = extract_track(tokens, 1)
        assert all(
            plan.track == 1 and plan.instrument == 0
            for plans in scaffold
            for plan in plans
        )
        assert [len(plans[0].pitch_counts) for plans in scaffold] == [4, 4]
        assert non_drum_tracks(base) == []

    def test_empty_scaffold_returns_input(self, setup):
        store, vocab, tokens = setup
        out = complete_tracks(store, CFG, vocab, tokens, [[] for _ in range(2)], rng(0))
        assert out == tokens

    def test_drum_tokens_preserved_verbatim(self, setup):
        store, vocab, tokens = setup
        base, scaffold, _ = extract_track(tokens, 1)
        out = complete_tracks(store, CFG, vocab, base, scaffold, rng(0), Sampler(temperature=0.0))
        drums_in = [t for t in base if t.is_pitch()]
        drums_out = [t for t in out if t.is_pitch() and t.instrument == DRUM_INSTRUMENT]
        assert [(t.event, t.duration, t.track) for t in drums_in] == [
            (t.event, t.duration, t.track) for t in drums_out
        ]

    def test_output_always_decodes(self, setup):
        store, vocab, tokens = setup
        base, scaffold, _ = extract_track(tokens, 1)
        for seed in range(10):
            out = complete_tracks(
                store, CFG, vocab, base, scaffold, rng(seed), Sampler(temperature=1.5, top_k=0)
            )
            clip = decode(out)
            assert clip.note_count() >= sum(1 for t in base if t.is_pitch())

    def test_scaffold_beyond_measures_rejected(self, setup):
        store, vocab, tokens = setup
        plans = [[TrackPlan(track=1, instrument=0, pitch_counts=(1,))] for _ in range(9)]
        from motionmidi.bert import CompletionError

        with pytest.raises(CompletionError, match="measures"):
            complete_tracks(store, CFG, vocab, tokens, plans, rng(0))

    def test_training_example_matches_inference_layout(self, setup):
        _, vocab, tokens = setup
        example = track_completion_example(tokens, 1, vocab)
        base, scaffold, _ = extract_track(tokens, 1)
        problem = build_completion(base, scaffold, vocab)
        assert example.ids["event"].size == problem.ids["event"].size
        assert (example.pos_groups == problem.pos_groups).all()

    def test_partial_reveal_keeps_targets_consistent(self, setup):
        _, vocab, tokens = setup
        full = track_completion_example(tokens, 1, vocab)
        partial = track_completion_example(tokens, 1, vocab, rng(11))
        # any position still masked in the partial example shares the target
        for f in ("event", "duration"):
            both = partial.masks[f] & full.masks[f]
            assert (partial.targets[f][both] == full.targets[f][both]).all()
            revealed = full.masks[f] & ~partial.masks[f]
            assert (partial.ids[f][revealed] == full.targets[f][revealed]).all()

    def test_pad_batch_shapes(self, setup):
        _, vocab, tokens = setup
        short = measure_mask(echo_clip(1), vocab, rng(1))
        long = measure_mask(echo_clip(3), vocab, rng(2))
        ids, groups, real = pad_batch([short, long])
        assert ids["event"].shape == groups.shape == real.shape
        assert real[0].sum() == short.ids["event"].size
        assert real[1].all()

    def test_idempotent_on_unmasked(self, setup):
        store, vocab, tokens = setup
        out1 = complete_tracks(store, CFG, vocab, tokens, [[], []], rng(0))
        out2 = complete_tracks(store, CFG, vocab, out1, [[], []], rng(0))
        assert out1 == out2 == tokens


def test_split_measures_structure():
    tokens = echo_clip(3)
    measures = split_measures(tokens)
    assert len(measures) == 3
    for measure in measures:
        assert measure[0].event == "BOM"

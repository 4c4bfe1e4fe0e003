"""Motion encoder: graph conv, beat head, style branch, fusion, augmentation."""
import json

import numpy as np
import pytest

from motionmidi.encoder import (
    EncoderConfig,
    MotionGraph,
    SkeletonError,
    SkeletonSequence,
    affine_transform,
    augment_affine,
    beat_head,
    beats_from_logits,
    chain_graph,
    fuse,
    init_beat_head,
    init_fuse,
    init_stgcn,
    init_style,
    load_clip,
    sample_affine,
    save_clip,
    spatial_conv,
    stgcn_forward,
    style_forward,
)
from motionmidi.nn import ParamStore, Tensor, backward, rng, tsum
from motionmidi.nn.gradcheck import finite_difference_check, max_error
from motionmidi.nn.layers import init_linear

CFG = EncoderConfig.desk(n_genres=2)


def small_setup(seed=0, joints=4):
    gen = rng(seed)
    store = ParamStore()
    init_stgcn(store, gen, CFG)
    init_beat_head(store, gen, CFG)
    init_style(store, gen, CFG)
    init_fuse(store, gen, CFG)
    return store, chain_graph(joints), gen


class TestSkeletonIO:
    def test_clip_json_roundtrip(self, tmp_path):
        gen = rng(1)
        clip = SkeletonSequence(
            frames=gen.normal(size=(5, 4, 3)), genre="smooth", beat_frames=[0, 3]
        )
        path = tmp_path / "clip.json"
        save_clip(path, clip)
        loaded = load_clip(path)
        assert (loaded.frames == clip.frames).all()
        assert loaded.genre == "smooth"
        assert loaded.beat_frames == [0, 3]
        assert loaded.fps == 20

    def test_bad_shape_rejected(self):
        with pytest.raises(SkeletonError, match="T x J x 3"):
            SkeletonSequence(frames=np.zeros((5, 4)))

    def test_nan_rejected(self):
        frames = np.zeros((2, 3, 3))
        frames[0, 0, 0] = np.nan
        with pytest.raises(SkeletonError, match="non-finite"):
            SkeletonSequence(frames=frames)

    def test_joint_count_mismatch_detected(self, tmp_path):
        path = tmp_path / "clip.json"
        path.write_text(json.dumps({"fps": 20, "joints": 5, "frames": [[[0, 0, 0]] * 4]}))
        with pytest.raises(SkeletonError, match="joints"):
            load_clip(path)

    def test_beat_vector(self):
        clip = SkeletonSequence(frames=np.zeros((6, 2, 3)), beat_frames=[1, 4, 99])
        assert clip.beat_vector().tolist() == [0, 1, 0, 0, 1, 0]


class TestMotionGraph:
    def test_adjacency_symmetric_with_self_loops(self):
        graph = chain_graph(4)
        a = graph.adjacency()
        assert (a == a.T).all()
        assert (np.diag(a) == 1).all()

    def test_normalized_rows_sum_to_one(self):
        norm = chain_graph(5).normalized_adjacency()
        assert np.allclose(norm.sum(axis=1), 1.0)

    def test_bad_edge_rejected(self):
        with pytest.raises(SkeletonError):
            MotionGraph(n_joints=3, edges=[(0, 7)])


class TestStgcn:
    def test_zero_input_deterministic(self):
        store, graph, _ = small_setup()
        x = np.zeros((1, 6, 4, 3))
        a = stgcn_forward(store, x, graph, CFG)
        b = stgcn_forward(store, x, graph, CFG)
        assert (a.data == b.data).all()

    def test_temporal_length_preserved(self):
        store, graph, gen = small_setup()
        for t in (1, 5, 17):
            out = stgcn_forward(store, gen.normal(size=(2, t, 4, 3)), graph, CFG)
            assert out.shape == (2, t, CFG.feature_dim)

    def test_joint_permutation_leaves_output_unchanged(self):
        store, graph, gen = small_setup()
        x = gen.normal(size=(2, 6, 4, 3))
        perm = np.array([2, 0, 3, 1])
        xp = np.zeros_like(x)
        for i in range(4):
            xp[:, :, perm[i], :] = x[:, :, i, :]
        out_a = stgcn_forward(store, x, graph, CFG)
        out_b = stgcn_forward(store, xp, graph.permuted(perm), CFG)
        assert np.allclose(out_a.data, out_b.data, atol=1e-10)

    def test_two_node_spatial_conv_matches_hand_calculation(self):
        """Path graph 0-1 with self-loops: each node averages itself and its
        neighbor, then multiplies the weight. Closed form checked by hand."""
        store = ParamStore()
        gen = rng(3)
        init_linear(store, gen, "sc", 2, 2)
        graph = chain_graph(2)
        x = np.array([[[[1.0, 2.0], [3.0, 4.0]]]])  # (B=1, T=1, V=2, C=2)
        out = spatial_conv(store, "sc", Tensor(x), graph.normalized_adjacency())
        w = store["sc.w"].data
        b = store["sc.b"].data
        aggregated = np.array([[2.0, 3.0], [2.0, 3.0]])  # mean of the two nodes
        assert np.allclose(out.data[0, 0], aggregated @ w + b)

    def test_joint_mismatch_rejected(self):
        store, graph, gen = small_setup()
        with pytest.raises(ValueError, match="joints"):
            stgcn_forward(store, gen.normal(size=(1, 4, 9, 3)), graph, CFG)


class TestBeatHead:
    def test_output_length_matches_frames(self):
        store, graph, gen = small_setup()
        zm = stgcn_forward(store, gen.normal(size=(1, 13, 4, 3)), graph, CFG)
        logits = beat_head(store, zm, CFG)
        assert logits.shape == (1, 13, 2)

    def test_threshold_rule(self):
        logits = np.zeros((1, 4, 2))
        logits[0, [1, 3], 1] = 2.0
        assert beats_from_logits(logits)[0].tolist() == [0, 1, 0, 1]

    def test_loss_decreases_on_average_over_200_steps(self):
        """Overfit one batch: trailing losses must sit well below the head."""
        from motionmidi.encoder import beat_loss, init_stgcn as init_s
        from motionmidi.nn import AdamState, Schedule, adam_step, backward

        gen = rng(44)
        store = ParamStore()
        init_s(store, gen, CFG)
        init_beat_head(store, gen, CFG)
        graph = chain_graph(4)
        x = gen.normal(size=(2, 40, 4, 3))
        zb = np.zeros((2, 40))
        zb[:, ::10] = 1.0
        opt = AdamState()
        losses = []
        for t in range(1, 201):
            logits = beat_head(store, stgcn_forward(store, x, graph, CFG), CFG)
            loss = beat_loss(logits, zb)
            grads, _ = backward(loss, store)
            adam_step(store, grads, opt, t, Schedule(peak=5e-3, warmup=20))
            losses.append(loss.item())
        assert np.mean(losses[-20:]) < 0.3 * np.mean(losses[:20])


class TestStyle:
    def test_embedding_is_32_dim_for_any_length(self):
        store, graph, gen = small_setup()
        for t in (4, 9, 30):
            emb, logits = style_forward(store, gen.normal(size=(1, t, 4, 3)), graph, CFG)
            assert emb.shape == (1, 32)
            assert logits.shape == (1, CFG.n_genres)

    def test_fixed_input_is_byte_identical_across_calls(self):
        store, graph, gen = small_setup()
        x = gen.normal(size=(1, 8, 4, 3))
        a, _ = style_forward(store, x, graph, CFG)
        b, _ = style_forward(store, x, graph, CFG)
        assert a.data.tobytes() == b.data.tobytes()

    def test_argmax_invariant_to_global_translation(self):
        store, graph, gen = small_setup()
        frames = gen.normal(size=(6, 4, 3))
        clip = SkeletonSequence(frames=frames)
        shifted = SkeletonSequence(frames=frames + np.array([5.0, -2.0, 1.0]))
        _, a = style_forward(store, clip.root_centered()[None], graph, CFG)
        _, b = style_forward(store, shifted.root_centered()[None], graph, CFG)
        assert np.argmax(a.data) == np.argmax(b.data)
        assert np.allclose(a.data, b.data, atol=1e-10)


class TestFuse:
    def test_all_zero_beats_yield_identical_rows(self):
        store, _, gen = small_setup()
        zs = Tensor(gen.normal(size=(1, 32)))
        out = fuse(store, np.zeros((1, 7)), zs)
        assert np.allclose(out.data[0], out.data[0, 0])

    def test_flipping_one_bit_changes_only_that_row(self):
        store, _, gen = small_setup()
        zs = Tensor(gen.normal(size=(1, 32)))
        zb = np.zeros((1, 7))
        base = fuse(store, zb, zs).data
        zb2 = zb.copy()
        zb2[0, 3] = 1.0
        changed = fuse(store, zb2, zs).data
        diff = np.abs(changed - base).sum(axis=2)[0]
        assert diff[3] > 0
        assert np.allclose(diff[[0, 1, 2, 4, 5, 6]], 0.0)

    def test_rows_finite_nonzero_at_random_init(self):
        store, _, gen = small_setup()
        out = fuse(store, np.ones((1, 3)), Tensor(gen.normal(size=(1, 32))))
        norms = np.linalg.norm(out.data, axis=2)
        assert np.isfinite(out.data).all()
        assert (norms > 0).all()


class TestAugment:
    def test_identity_parameters_leave_input(self):
        gen = rng(5)
        frames = gen.normal(size=(4, 3, 3))
        out = affine_transform(frames, np.eye(3), 1.0, np.zeros(3))
        assert np.allclose(out, frames)

    def test_bone_lengths_scale_by_sampled_factor(self):
        gen = rng(6)
        clip = SkeletonSequence(frames=gen.normal(size=(5, 4, 3)))
        rotation, scale, shift = sample_affine(rng(7))
        out = affine_transform(clip.frames, rotation, scale, shift)
        bones_in = np.linalg.norm(clip.frames[:, 1:] - clip.frames[:, :-1], axis=2)
        bones_out = np.linalg.norm(out[:, 1:] - out[:, :-1], axis=2)
        assert np.allclose(bones_out, bones_in * scale, atol=1e-10)

    def test_same_seed_same_output(self):
        gen = rng(8)
        clip = SkeletonSequence(frames=gen.normal(size=(5, 4, 3)), beat_frames=[1])
        a = augment_affine(clip, rng(99))
        b = augment_affine(clip, rng(99))
        assert (a.frames == b.frames).all()
        assert a.beat_frames == clip.beat_frames

    def test_rotation_angles_within_15_degrees(self):
        for seed in range(20):
            rotation, scale, shift = sample_affine(rng(seed))
            assert 0.9 <= scale <= 1.1
            assert (np.abs(shift) <= 0.05).all()
            assert np.allclose(rotation @ rotation.T, np.eye(3), atol=1e-12)


class TestEncoderGradients:
    def test_full_encoder_miniature_gradcheck(self):
        """Two frames, three joints: movement + beat + style + fuse paths."""
        cfg = EncoderConfig(
            stgcn_channels=(4,),
            feature_dim=6,
            temporal_kernel=3,
            beat_layers=1,
            beat_heads=2,
            beat_dim=6,
            beat_ff=8,
            style_channels=(4,),
            style_gru_hidden=4,
            n_genres=2,
            d_model=8,
        )
        gen = rng(9)
        store = ParamStore()
        init_stgcn(store, gen, cfg)
        init_beat_head(store, gen, cfg)
        init_style(store, gen, cfg)
        init_fuse(store, gen, cfg)
        graph = chain_graph(3)
        x = gen.normal(size=(1, 2, 3, 3))
        w_out = gen.normal(size=(1, 2, cfg.d_model))

        def fn():
            zm = stgcn_forward(store, x, graph, cfg)
            logits = beat_head(store, zm, cfg)
            zb = Tensor(np.array([[1.0, 0.0]]))
            zs, glogits = style_forward(store, x, graph, cfg)
            z = fuse(store, zb, zs)
            return tsum(z * Tensor(w_out)) + tsum(logits * 0.1) + tsum(glogits * 0.1)

        results = finite_difference_check(fn, store, max_elements=25)
        assert max_error(results) < 1e-5

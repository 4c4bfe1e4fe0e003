"""Finite-difference suites over every network layer type.

Each suite builds a miniature model on fixed seeded inputs and compares
reverse-mode gradients of a scalar loss against central differences. The
CLI ``gradcheck`` subcommand exits zero only when every suite passes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..bert.masking import measure_mask
from ..bert.model import BertConfig, bert_forward, init_bert, weighted_loss
from ..drum.model import (
    DrumConfig,
    drum_forward,
    drum_loss,
    encode_condition,
    field_weights,
    init_drum_model,
    teacher_forcing_batch,
    vgm,
)
from ..encoder.networks import (
    EncoderConfig,
    beat_head,
    beat_loss,
    fuse,
    init_beat_head,
    init_fuse,
    init_stgcn,
    init_style,
    stgcn_forward,
    style_forward,
    style_loss,
)
from ..encoder.skeleton import chain_graph
from ..midi.notes import DRUM_INSTRUMENT, Note, quantize
from ..midi.tokens import encode
from ..midi.vocab import build_vocab
from ..nn import ParamStore, Tensor, attention, layer_norm, rng, tsum
from ..nn.gradcheck import finite_difference_check, max_error
from ..nn.layers import (
    causal_mask,
    feed_forward,
    gru,
    init_attention_block,
    init_feed_forward,
    init_gru,
    init_relative_bias,
    multihead_attention,
    relative_bias,
)


@dataclass
class SuiteResult:
    name: str
    max_rel_err: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return self.max_rel_err < self.tolerance


def _tiny_vocab():
    notes = [
        Note(onset=0, track=0, pitch=36, duration=30, instrument=DRUM_INSTRUMENT),
        Note(onset=480, track=0, pitch=38, duration=60, instrument=DRUM_INSTRUMENT),
        Note(onset=960, track=1, pitch=60, duration=30, instrument=0),
        Note(onset=2000, track=1, pitch=64, duration=30, instrument=0),
    ]
    tokens = encode(quantize(notes))
    return build_vocab([tokens]), tokens


def run_gradcheck(tol: float = 1e-5, max_elements: int = 40) -> list[SuiteResult]:
    suites = []
    gen = rng(1234)

    # layer_norm primitive
    store = ParamStore()
    gain = store.add("gain", gen.normal(1.0, 0.1, size=5))
    bias = store.add("bias", gen.normal(0.0, 0.1, size=5))
    x_ln = gen.normal(size=(3, 5))
    suites.append(
        ("layer_norm", lambda: tsum(layer_norm(Tensor(x_ln), gain, bias) * Tensor(x_ln)), store)
    )

    # raw attention op via projections
    store = ParamStore()
    wq = store.add("wq", gen.normal(0.0, 0.5, size=(4, 4)))
    wk = store.add("wk", gen.normal(0.0, 0.5, size=(4, 4)))
    wv = store.add("wv", gen.normal(0.0, 0.5, size=(4, 4)))
    q_in = gen.normal(size=(3, 4))
    kv_in = gen.normal(size=(5, 4))
    weight = gen.normal(size=(3, 4))
    suites.append(
        (
            "attention",
            lambda: tsum(
                attention(Tensor(q_in) @ wq, Tensor(kv_in) @ wk, Tensor(kv_in) @ wv)
                * Tensor(weight)
            ),
            store,
        )
    )

    # causal multi-head self-attention with relative bias
    store = ParamStore()
    init_attention_block(store, gen, "msa", 8, 2)
    init_relative_bias(store, "msa.rel", 2, 4, causal=True)
    store["msa.rel"].data[:] = gen.normal(0.0, 0.3, size=store["msa.rel"].shape)
    x_msa = gen.normal(size=(2, 5, 8))
    groups = np.array([[0, 1, 1, 2, 3], [0, 0, 1, 2, 2]])
    w_msa = gen.normal(size=(2, 5, 8))

    def msa_fn():
        bias = relative_bias(store, "msa.rel", groups, groups, 4, causal=True)
        out = multihead_attention(
            store, "msa", Tensor(x_msa), Tensor(x_msa), 2, mask=causal_mask(5), bias=bias
        )
        return tsum(out * Tensor(w_msa))

    suites.append(("masked_self_attention", msa_fn, store))

    # VGM cross-attention
    store = ParamStore()
    init_attention_block(store, gen, "vgm", 8, 2)
    d_tok = gen.normal(size=(1, 4, 8))
    z_cond = gen.normal(size=(1, 6, 8))
    w_vgm = gen.normal(size=(1, 4, 8))
    suites.append(
        (
            "vgm_cross_attention",
            lambda: tsum(vgm(store, "vgm", Tensor(d_tok), Tensor(z_cond), 2) * Tensor(w_vgm)),
            store,
        )
    )

    # feed-forward
    store = ParamStore()
    init_feed_forward(store, gen, "ff", 6, 10)
    x_ff = gen.normal(size=(4, 6))
    w_ff = gen.normal(size=(4, 6))
    suites.append(("feed_forward", lambda: tsum(feed_forward(store, "ff", Tensor(x_ff)) * Tensor(w_ff)), store))

    # gated recurrent cell
    store = ParamStore()
    init_gru(store, gen, "gru", 4, 3)
    x_gru = gen.normal(size=(2, 5, 4))
    w_gru = gen.normal(size=(2, 3))
    suites.append(
        ("gated_recurrent", lambda: tsum(gru(store, "gru", Tensor(x_gru), 3)[1] * Tensor(w_gru)), store)
    )

    # spatial + temporal graph conv through a miniature movement branch
    enc_cfg = EncoderConfig(
        stgcn_channels=(4,),
        feature_dim=6,
        temporal_kernel=3,
        beat_layers=1,
        beat_heads=2,
        beat_dim=6,
        beat_ff=8,
        style_channels=(4, 4),
        style_gru_hidden=4,
        n_genres=2,
        d_model=8,
    )
    graph = chain_graph(3)
    store = ParamStore()
    init_stgcn(store, gen, enc_cfg)
    init_beat_head(store, gen, enc_cfg)
    x_enc = gen.normal(size=(1, 2, 3, 3))
    zb_target = np.array([[1.0, 0.0]])

    def encoder_fn():
        zm = stgcn_forward(store, x_enc, graph, enc_cfg)
        return beat_loss(beat_head(store, zm, enc_cfg), zb_target)

    suites.append(("graph_conv_and_beat_head", encoder_fn, store))

    # style branch: graph blocks + gru pooling + classifier loss
    store = ParamStore()
    init_style(store, gen, enc_cfg)
    x_sty = gen.normal(size=(2, 4, 3, 3))
    labels = np.array([0, 1])

    def style_fn():
        _, logits = style_forward(store, x_sty, graph, enc_cfg)
        return style_loss(logits, labels)

    suites.append(("style_branch", style_fn, store))

    # fuse layer
    store = ParamStore()
    init_fuse(store, gen, enc_cfg)
    zb_in = np.array([[0.0, 1.0, 0.0]])
    zs_in = gen.normal(size=(1, 32))
    w_fuse = gen.normal(size=(1, 3, enc_cfg.d_model))
    suites.append(
        ("fuse", lambda: tsum(fuse(store, zb_in, Tensor(zs_in)) * Tensor(w_fuse)), store)
    )

    # full miniature drum decoder loss (embeddings, paired MSA/VGM, heads)
    vocab, tokens = _tiny_vocab()
    drum_cfg = DrumConfig(d_model=8, n_heads=2, n_blocks=2, d_ff=12, enc_blocks=1, max_len=64)
    store = ParamStore()
    init_drum_model(store, gen, drum_cfg, vocab)
    z_drum = gen.normal(size=(1, 4, 8))
    inputs, groups_d, targets, mask = teacher_forcing_batch(vocab, [tokens])
    weights = field_weights(vocab)

    def drum_fn():
        memory = encode_condition(store, drum_cfg, z_drum)
        logits = drum_forward(store, drum_cfg, inputs, groups_d, memory, vocab)
        return drum_loss(logits, targets, mask, weights)

    suites.append(("drum_decoder_loss", drum_fn, store))

    # full miniature bidirectional model with weighted masked loss
    bert_cfg = BertConfig(hidden=8, n_heads=2, n_layers=2, d_ff=12, max_len=64)
    store = ParamStore()
    init_bert(store, gen, bert_cfg, vocab)
    example = measure_mask(tokens, vocab, rng(7))

    def bert_fn():
        logits = bert_forward(
            store, bert_cfg, {f: v[None] for f, v in example.ids.items()}, example.pos_groups[None]
        )
        return weighted_loss(logits, [example], vocab)

    suites.append(("bert_masked_loss", bert_fn, store))

    results = []
    for name, fn, store in suites:
        checks = finite_difference_check(fn, store, max_elements=max_elements)
        results.append(SuiteResult(name=name, max_rel_err=max_error(checks), tolerance=tol))
    return results

"""Reusable network blocks in a functional style.

Parameters live in a ParamStore under dotted prefixes; each ``init_*``
registers arrays, each ``apply``-style function reads them back. Sequence
tensors are batched as (B, n, d); attention reshapes to (B, heads, n, d_head).
"""
from __future__ import annotations

import numpy as np

from .params import ParamStore, glorot
from .tensor import (
    Tensor,
    ShapeError,
    add,
    attention,
    concat,
    matmul,
    relu,
    reshape,
    layer_norm,
    sigmoid,
    softmax,
    stack,
    take,
    tanh,
    transpose,
)


def init_linear(store: ParamStore, gen, name: str, d_in: int, d_out: int, bias: bool = True):
    store.add(f"{name}.w", glorot(gen, d_in, d_out))
    if bias:
        store.add(f"{name}.b", np.zeros(d_out))


def linear(store: ParamStore, name: str, x: Tensor) -> Tensor:
    out = matmul(x, store[f"{name}.w"])
    if f"{name}.b" in store:
        out = add(out, store[f"{name}.b"])
    return out


def init_norm(store: ParamStore, name: str, d: int):
    store.add(f"{name}.gain", np.ones(d))
    store.add(f"{name}.bias", np.zeros(d))


def norm(store: ParamStore, name: str, x: Tensor) -> Tensor:
    return layer_norm(x, store[f"{name}.gain"], store[f"{name}.bias"])


def init_embedding(store: ParamStore, gen, name: str, n: int, d: int):
    store.add(name, gen.normal(0.0, 0.02, size=(n, d)))


def causal_mask(n: int) -> np.ndarray:
    return np.tril(np.ones((n, n), dtype=bool))


def init_relative_bias(store: ParamStore, name: str, n_heads: int, clip: int, causal: bool):
    n_bins = clip + 1 if causal else 2 * clip + 1
    store.add(name, np.zeros((n_bins, n_heads)))


def relative_bias(
    store: ParamStore,
    name: str,
    groups_q: np.ndarray,
    groups_k: np.ndarray,
    clip: int,
    causal: bool,
) -> Tensor:
    """Learned per-head additive bias over clipped pos-group distances.

    Tokens sharing a group get distance zero, which is what makes attention
    blind to note order inside a chord. Groups may be (n,) for one shared
    layout or (B, n) per example; output is (h, n, m) or (B, h, n, m).
    """
    gq, gk = np.asarray(groups_q), np.asarray(groups_k)
    if gq.ndim == 1:
        dist = gq[:, None] - gk[None, :]
    else:
        dist = gq[:, :, None] - gk[:, None, :]
    if causal:
        idx = np.clip(dist, 0, clip)
    else:
        idx = np.clip(dist, -clip, clip) + clip
    bias = take(store[name], idx.astype(np.int64))  # (..., n, m, h)
    axes = (2, 0, 1) if gq.ndim == 1 else (0, 3, 1, 2)
    return transpose(bias, axes)


def init_attention_block(store: ParamStore, gen, name: str, d_model: int, n_heads: int):
    if d_model % n_heads:
        raise ShapeError(f"d_model {d_model} not divisible by heads {n_heads}")
    for proj in ("wq", "wk", "wv", "wo"):
        store.add(f"{name}.{proj}", glorot(gen, d_model, d_model))


def multihead_attention(
    store: ParamStore,
    name: str,
    q_in: Tensor,
    kv_in: Tensor,
    n_heads: int,
    mask: np.ndarray | None = None,
    bias: Tensor | None = None,
) -> Tensor:
    """(B, n, d) x (B, m, d) -> (B, n, d) multi-head attention."""
    b, n, d = q_in.shape
    m = kv_in.shape[-2]
    dh = d // n_heads

    def split(x: Tensor, length: int) -> Tensor:
        x = reshape(x, (b, length, n_heads, dh))
        return transpose(x, (0, 2, 1, 3))

    q = split(matmul(q_in, store[f"{name}.wq"]), n)
    k = split(matmul(kv_in, store[f"{name}.wk"]), m)
    v = split(matmul(kv_in, store[f"{name}.wv"]), m)
    out = attention(q, k, v, mask=mask, bias=bias)  # (B, h, n, dh)
    out = reshape(transpose(out, (0, 2, 1, 3)), (b, n, d))
    return matmul(out, store[f"{name}.wo"])


def init_feed_forward(store: ParamStore, gen, name: str, d_model: int, d_hidden: int):
    init_linear(store, gen, f"{name}.up", d_model, d_hidden)
    init_linear(store, gen, f"{name}.down", d_hidden, d_model)


def feed_forward(store: ParamStore, name: str, x: Tensor) -> Tensor:
    return linear(store, f"{name}.down", relu(linear(store, f"{name}.up", x)))


def init_transformer_layer(
    store: ParamStore,
    gen,
    name: str,
    d_model: int,
    n_heads: int,
    d_ff: int,
    cross: bool = False,
):
    init_norm(store, f"{name}.ln1", d_model)
    init_attention_block(store, gen, f"{name}.self", d_model, n_heads)
    if cross:
        init_norm(store, f"{name}.lnx", d_model)
        init_attention_block(store, gen, f"{name}.cross", d_model, n_heads)
    init_norm(store, f"{name}.ln2", d_model)
    init_feed_forward(store, gen, f"{name}.ff", d_model, d_ff)


def transformer_layer(
    store: ParamStore,
    name: str,
    x: Tensor,
    n_heads: int,
    self_mask: np.ndarray | None = None,
    self_bias: Tensor | None = None,
    memory: Tensor | None = None,
    memory_mask: np.ndarray | None = None,
) -> Tensor:
    """Pre-norm residual block: self-attention, optional cross-attention, FF."""
    pre = norm(store, f"{name}.ln1", x)
    h = multihead_attention(
        store, f"{name}.self", pre, pre, n_heads, mask=self_mask, bias=self_bias
    )
    x = add(x, h)
    if memory is not None:
        h = multihead_attention(
            store, f"{name}.cross", norm(store, f"{name}.lnx", x), memory,
            n_heads, mask=memory_mask,
        )
        x = add(x, h)
    x = add(x, feed_forward(store, f"{name}.ff", norm(store, f"{name}.ln2", x)))
    return x


def init_gru(store: ParamStore, gen, name: str, d_in: int, d_hidden: int):
    store.add(f"{name}.w", glorot(gen, d_in, 3 * d_hidden))
    store.add(f"{name}.u", glorot(gen, d_hidden, 3 * d_hidden))
    store.add(f"{name}.b", np.zeros(3 * d_hidden))


def gru(store: ParamStore, name: str, x: Tensor, d_hidden: int) -> tuple[Tensor, Tensor]:
    """Gated recurrent layer over (B, T, C); returns (B, T, H) and final (B, H)."""
    b, t, _ = x.shape
    gates_x = add(matmul(x, store[f"{name}.w"]), store[f"{name}.b"])  # (B, T, 3H)
    u = store[f"{name}.u"]
    h = Tensor(np.zeros((b, d_hidden)))
    outputs = []
    for step in range(t):
        gx = gates_x[:, step]
        gh = matmul(h, u)
        r = sigmoid(add(gx[:, :d_hidden], gh[:, :d_hidden]))
        z = sigmoid(add(gx[:, d_hidden : 2 * d_hidden], gh[:, d_hidden : 2 * d_hidden]))
        n = tanh(add(gx[:, 2 * d_hidden :], r * gh[:, 2 * d_hidden :]))
        h = add((1.0 - z) * n, z * h)
        outputs.append(h)
    return stack(outputs, axis=1), h


def sinusoidal_positions(t: int, d: int) -> np.ndarray:
    """Classic fixed sin/cos positional table (t, d), used on encoder inputs."""
    position = np.arange(t, dtype=np.float64)[:, None]
    div = np.exp(np.arange(0, d, 2, dtype=np.float64) * (-np.log(10000.0) / d))
    table = np.zeros((t, d))
    table[:, 0::2] = np.sin(position * div)
    table[:, 1::2] = np.cos(position * div[: d // 2])
    return table

"""Dense float64 tensors with reverse-mode differentiation.

Every operation records its parents and a gradient closure; ``backward``
replays the tape in reverse topological order with a deterministic
accumulation schedule. All math is 64-bit; any op producing NaN/Inf raises
NonFiniteError at the op that produced it.
"""
from __future__ import annotations

import numpy as np


class ShapeError(ValueError):
    pass


class NonFiniteError(FloatingPointError):
    pass


def rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _as_array(value) -> np.ndarray:
    return np.asarray(value, dtype=np.float64)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_grad_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = _as_array(data)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._grad_fn = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, grad={'yes' if self.requires_grad else 'no'})"

    # arithmetic sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return getitem(self, key)

    def reshape(self, *shape):
        return reshape(self, shape if len(shape) > 1 or isinstance(shape[0], int) else shape[0])

    def transpose(self, axes=None):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)


def _wrap(value) -> Tensor:
    return value if isinstance(value, Tensor) else Tensor(value)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], grad_fn) -> Tensor:
    if not np.isfinite(data).all():
        raise NonFiniteError("operation produced non-finite values")
    out = Tensor(data)
    if any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._grad_fn = grad_fn
    return out


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if grad.shape == shape:
        return grad
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data + b.data

    def grad_fn(g, out):
        return (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape))

    return _make(data, (a, b), grad_fn)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data - b.data

    def grad_fn(g, out):
        return (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape))

    return _make(data, (a, b), grad_fn)


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    data = a.data * b.data

    def grad_fn(g, out):
        return (_unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape))

    return _make(data, (a, b), grad_fn)


def div(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = a.data / b.data

    def grad_fn(g, out):
        ga = _unbroadcast(g / b.data, a.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.shape)
        return (ga, gb)

    return _make(data, (a, b), grad_fn)


def powc(a, exponent: float) -> Tensor:
    a = _wrap(a)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        data = a.data**exponent

    def grad_fn(g, out):
        return (g * exponent * a.data ** (exponent - 1),)

    return _make(data, (a,), grad_fn)


def exp(a) -> Tensor:
    a = _wrap(a)
    with np.errstate(over="ignore"):
        data = np.exp(a.data)

    def grad_fn(g, out):
        return (g * out.data,)

    return _make(data, (a,), grad_fn)


def log(a) -> Tensor:
    a = _wrap(a)
    with np.errstate(divide="ignore", invalid="ignore"):
        data = np.log(a.data)

    def grad_fn(g, out):
        return (g / a.data,)

    return _make(data, (a,), grad_fn)


def sqrt(a) -> Tensor:
    a = _wrap(a)
    with np.errstate(invalid="ignore"):
        data = np.sqrt(a.data)

    def grad_fn(g, out):
        return (g * 0.5 / out.data,)

    return _make(data, (a,), grad_fn)


def tanh(a) -> Tensor:
    a = _wrap(a)
    data = np.tanh(a.data)

    def grad_fn(g, out):
        return (g * (1.0 - out.data * out.data),)

    return _make(data, (a,), grad_fn)


def sigmoid(a) -> Tensor:
    a = _wrap(a)
    data = 1.0 / (1.0 + np.exp(-a.data))

    def grad_fn(g, out):
        return (g * out.data * (1.0 - out.data),)

    return _make(data, (a,), grad_fn)


def relu(a) -> Tensor:
    a = _wrap(a)
    data = np.maximum(a.data, 0.0)

    def grad_fn(g, out):
        return (g * (a.data > 0.0),)

    return _make(data, (a,), grad_fn)


def matmul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2:
        raise ShapeError(f"matmul needs >=2-d operands, got {a.shape} @ {b.shape}")
    if a.shape[-1] != b.shape[-2]:
        raise ShapeError(
            f"matmul inner dims differ: lhs columns {a.shape[-1]} != rhs rows {b.shape[-2]}"
        )
    data = np.matmul(a.data, b.data)

    def grad_fn(g, out):
        ga = _unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape)
        gb = _unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape)
        return (ga, gb)

    return _make(data, (a, b), grad_fn)


def transpose(a, axes=None) -> Tensor:
    a = _wrap(a)
    data = np.transpose(a.data, axes)
    if axes is None:
        inverse = None
    else:
        inverse = tuple(np.argsort(axes))

    def grad_fn(g, out):
        return (np.transpose(g, inverse),)

    return _make(data, (a,), grad_fn)


def reshape(a, shape) -> Tensor:
    a = _wrap(a)
    data = a.data.reshape(shape)

    def grad_fn(g, out):
        return (g.reshape(a.shape),)

    return _make(data, (a,), grad_fn)


def getitem(a, key) -> Tensor:
    a = _wrap(a)
    data = a.data[key]

    def grad_fn(g, out):
        ga = np.zeros_like(a.data)
        np.add.at(ga, key, g)
        return (ga,)

    return _make(np.array(data, dtype=np.float64), (a,), grad_fn)


def concat(tensors: list, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.shape[axis] for t in tensors]
    offsets = np.cumsum([0] + sizes)

    def grad_fn(g, out):
        slices = []
        for i in range(len(tensors)):
            idx = [slice(None)] * g.ndim
            idx[axis] = slice(offsets[i], offsets[i + 1])
            slices.append(g[tuple(idx)])
        return tuple(slices)

    return _make(data, tuple(tensors), grad_fn)


def stack(tensors: list, axis: int = 0) -> Tensor:
    tensors = [_wrap(t) for t in tensors]
    data = np.stack([t.data for t in tensors], axis=axis)

    def grad_fn(g, out):
        moved = np.moveaxis(g, axis, 0)
        return tuple(moved[i] for i in range(len(tensors)))

    return _make(data, tuple(tensors), grad_fn)


def pad_axis(a, axis: int, before: int, after: int) -> Tensor:
    a = _wrap(a)
    widths = [(0, 0)] * a.ndim
    widths[axis] = (before, after)
    data = np.pad(a.data, widths)

    def grad_fn(g, out):
        idx = [slice(None)] * a.ndim
        idx[axis] = slice(before, before + a.shape[axis])
        return (g[tuple(idx)],)

    return _make(data, (a,), grad_fn)


def tsum(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def grad_fn(g, out):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        ax = axis if isinstance(axis, tuple) else (axis,)
        if not keepdims:
            g = np.expand_dims(g, ax)
        return (np.broadcast_to(g, a.shape).copy(),)

    return _make(np.asarray(data, dtype=np.float64), (a,), grad_fn)


def tmean(a, axis=None, keepdims=False) -> Tensor:
    a = _wrap(a)
    if axis is None:
        count = a.size
    else:
        ax = axis if isinstance(axis, tuple) else (axis,)
        count = int(np.prod([a.shape[i] for i in ax]))
    return mul(tsum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def take(a, indices: np.ndarray) -> Tensor:
    """Gather along axis 0: out = a[indices] for an integer index array."""
    a = _wrap(a)
    indices = np.asarray(indices)
    data = a.data[indices]

    def grad_fn(g, out):
        ga = np.zeros_like(a.data)
        np.add.at(ga, indices, g)
        return (ga,)

    return _make(data, (a,), grad_fn)


def gather_rows(a, idx: np.ndarray) -> Tensor:
    """out[i] = a[i, idx[i]] for a 2-d tensor (used by cross-entropy)."""
    a = _wrap(a)
    if a.ndim != 2:
        raise ShapeError(f"gather_rows expects 2-d logits, got {a.shape}")
    idx = np.asarray(idx)
    rows = np.arange(a.shape[0])
    data = a.data[rows, idx]

    def grad_fn(g, out):
        ga = np.zeros_like(a.data)
        np.add.at(ga, (rows, idx), g)
        return (ga,)

    return _make(data, (a,), grad_fn)


def softmax(a, axis: int = -1) -> Tensor:
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    data = e / e.sum(axis=axis, keepdims=True)

    def grad_fn(g, out):
        s = out.data
        inner = (g * s).sum(axis=axis, keepdims=True)
        return ((g - inner) * s,)

    return _make(data, (a,), grad_fn)


def log_softmax(a, axis: int = -1) -> Tensor:
    a = _wrap(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    data = shifted - lse

    def grad_fn(g, out):
        soft = np.exp(out.data)
        return (g - soft * g.sum(axis=axis, keepdims=True),)

    return _make(data, (a,), grad_fn)


def layer_norm(a, gain, bias, eps: float = 1e-6) -> Tensor:
    """Normalize over the last axis to zero mean/unit variance, then scale."""
    a, gain, bias = _wrap(a), _wrap(gain), _wrap(bias)
    d = a.shape[-1]
    if gain.shape != (d,) or bias.shape != (d,):
        raise ShapeError(
            f"layer_norm gain/bias must have shape ({d},), got {gain.shape}/{bias.shape}"
        )
    mu = a.data.mean(axis=-1, keepdims=True)
    var = a.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (a.data - mu) * inv
    data = xhat * gain.data + bias.data

    def grad_fn(g, out):
        gg = g * gain.data
        m1 = gg.mean(axis=-1, keepdims=True)
        m2 = (gg * xhat).mean(axis=-1, keepdims=True)
        ga = (gg - m1 - xhat * m2) * inv
        batch_axes = tuple(range(g.ndim - 1))
        ggain = (g * xhat).sum(axis=batch_axes)
        gbias = g.sum(axis=batch_axes)
        return (ga, ggain, gbias)

    return _make(data, (a, gain, bias), grad_fn)


def embed(table, ids: np.ndarray) -> Tensor:
    """Look up embedding rows; ids is any-int-shaped, output ids.shape + (d,)."""
    return take(table, np.asarray(ids, dtype=np.int64))


def attention(q, k, v, mask: np.ndarray | None = None, bias=None) -> Tensor:
    """Scaled dot-product attention.

    q: (..., n, d_qk), k: (..., m, d_qk), v: (..., m, d_v); optional boolean
    ``mask`` broadcastable to (..., n, m) where False forbids attending, and
    optional additive ``bias`` tensor broadcastable to the score shape.
    Rows of the attention matrix sum to one; a fully-masked row is an error.
    """
    q, k, v = _wrap(q), _wrap(k), _wrap(v)
    if q.shape[-1] != k.shape[-1]:
        raise ShapeError(f"query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ShapeError(f"key count {k.shape[-2]} != value count {v.shape[-2]}")
    scale = 1.0 / np.sqrt(q.shape[-1])
    scores = mul(matmul(q, transpose(k, _swap_last(k.ndim))), scale)
    if bias is not None:
        scores = add(scores, bias)
    if mask is not None:
        mask = np.asarray(mask, dtype=bool)
        if not mask.any(axis=-1).all():
            raise ShapeError("attention mask forbids every key for some query row")
        scores = add(scores, np.where(mask, 0.0, -1e30))
    weights = softmax(scores, axis=-1)
    return matmul(weights, v)


def _swap_last(ndim: int) -> tuple[int, ...]:
    axes = list(range(ndim))
    axes[-1], axes[-2] = axes[-2], axes[-1]
    return tuple(axes)


def backward(loss: Tensor, params=None):
    """Reverse-mode gradients of a scalar loss.

    Assigns ``.grad`` on every tensor reachable from ``loss`` that requires
    grad. When ``params`` (an iterable of (name, tensor) pairs or a mapping)
    is given, returns ``(grads, unreachable)``: a name->array dict with
    zeros for parameters the loss does not depend on, plus the list of
    those unreachable names.
    """
    if loss.size != 1:
        raise ShapeError(f"backward needs a scalar loss, got shape {loss.shape}")

    topo: list[Tensor] = []
    visited: set[int] = set()
    stack = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in reversed(node._parents):
            if parent.requires_grad and id(parent) not in visited:
                stack.append((parent, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(topo):
        g = grads.pop(id(node), None)
        if g is None:
            continue
        node.grad = g
        if node._grad_fn is None:
            continue
        parent_grads = node._grad_fn(g, node)
        for parent, pg in zip(node._parents, parent_grads):
            if not parent.requires_grad or pg is None:
                continue
            acc = grads.get(id(parent))
            if acc is None:
                grads[id(parent)] = pg.copy() if pg.base is not None or pg is g else pg
            else:
                acc += pg

    if params is None:
        return None

    items = params.items() if hasattr(params, "items") else list(params)
    out: dict[str, np.ndarray] = {}
    unreachable: list[str] = []
    for name, tensor in items:
        if id(tensor) in visited and tensor.grad is not None:
            out[name] = tensor.grad
        else:
            out[name] = np.zeros_like(tensor.data)
            unreachable.append(name)
    return out, unreachable

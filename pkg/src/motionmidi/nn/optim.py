"""Adam optimizer and warmup/inverse-square-root learning-rate schedule.

The published recipe uses beta2 = 0.9 (not the customary 0.999) and
epsilon = 1e-9; both are kept verbatim here and are configurable.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .params import ParamStore
from .tensor import ShapeError


@dataclass(frozen=True)
class Schedule:
    peak: float = 7e-4
    warmup: int = 6000


def lr(t: int, schedule: Schedule = Schedule()) -> float:
    """Linear warmup to the peak rate, then inverse-square-root decay."""
    if t < 1:
        raise ValueError(f"step {t} must be >= 1")
    return schedule.peak * min(t / schedule.warmup, np.sqrt(schedule.warmup / t))


@dataclass
class AdamState:
    beta1: float = 0.9
    beta2: float = 0.9
    eps: float = 1e-9
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: ParamStore,
    grads: dict[str, np.ndarray],
    state: AdamState,
    t: int,
    schedule: Schedule = Schedule(),
) -> ParamStore:
    """One in-place Adam update at step t >= 1 with rate lr(t)."""
    rate = lr(t, schedule)
    for name, tensor in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != tensor.data.shape:
            raise ShapeError(
                f"parameter {name!r}: gradient shape {g.shape} != value shape {tensor.data.shape}"
            )
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(tensor.data)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(tensor.data)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / (1.0 - state.beta1**t)
        v_hat = v / (1.0 - state.beta2**t)
        tensor.data = tensor.data - rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return params

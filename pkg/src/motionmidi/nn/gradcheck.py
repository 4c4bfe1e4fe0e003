"""Central finite-difference verification of recorded gradients."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .params import ParamStore
from .tensor import backward


@dataclass
class GradCheckResult:
    name: str
    max_rel_err: float
    worst_index: tuple
    analytic: float
    numeric: float

    def ok(self, tol: float = 1e-5) -> bool:
        return self.max_rel_err < tol


def finite_difference_check(
    fn,
    params: ParamStore,
    eps: float = 1e-5,
    max_elements: int | None = None,
) -> list[GradCheckResult]:
    """Compare reverse-mode gradients of ``fn()`` against central differences.

    ``fn`` must rebuild the forward pass from the current parameter values
    and return a scalar Tensor. Every parameter element is perturbed by
    +/- eps unless ``max_elements`` caps the count (elements are then taken
    in a deterministic stride pattern). Relative error is
    |analytic - numeric| / max(1, |analytic|, |numeric|).
    """
    loss = fn()
    analytic, _ = backward(loss, params)

    results = []
    for name, tensor in params.items():
        flat = tensor.data.reshape(-1)
        n = flat.size
        if max_elements is not None and n > max_elements:
            idxs = np.linspace(0, n - 1, max_elements).astype(int)
        else:
            idxs = np.arange(n)
        worst = GradCheckResult(name, 0.0, (), 0.0, 0.0)
        a_flat = analytic[name].reshape(-1)
        for i in idxs:
            orig = flat[i]
            flat[i] = orig + eps
            up = fn().item()
            flat[i] = orig - eps
            down = fn().item()
            flat[i] = orig
            numeric = (up - down) / (2.0 * eps)
            a = a_flat[i]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err >= worst.max_rel_err:
                worst = GradCheckResult(
                    name,
                    float(err),
                    tuple(np.unravel_index(i, tensor.data.shape)),
                    float(a),
                    float(numeric),
                )
        results.append(worst)
    return results


def max_error(results: list[GradCheckResult]) -> float:
    return max((r.max_rel_err for r in results), default=0.0)

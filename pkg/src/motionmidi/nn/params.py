"""Named parameter collections with stable iteration order."""
from __future__ import annotations

import numpy as np

from .tensor import ShapeError, Tensor


class ParamStore:
    """Insertion-ordered mapping name -> trainable Tensor."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self._params:
            raise ShapeError(f"duplicate parameter name {name!r}")
        t = Tensor(np.asarray(array, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self):
        return iter(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def subset(self, prefix: str) -> "ParamStore":
        """View of parameters whose names start with ``prefix`` (shared tensors)."""
        out = ParamStore()
        for name, t in self._params.items():
            if name.startswith(prefix):
                out._params[name] = t
        return out

    def n_values(self) -> int:
        return sum(t.size for t in self._params.values())

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._params.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        for name, array in state.items():
            if name in self._params:
                if self._params[name].data.shape != array.shape:
                    raise ShapeError(
                        f"parameter {name!r}: stored shape {array.shape} != "
                        f"current {self._params[name].data.shape}"
                    )
                self._params[name].data = np.asarray(array, dtype=np.float64)
            else:
                self.add(name, array)


def glorot(gen: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return gen.uniform(-limit, limit, size=(fan_in, fan_out))

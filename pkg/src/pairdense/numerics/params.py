"""Named parameter collection with deterministic (sorted) iteration."""

from __future__ import annotations

import numpy as np

from .tensor import Tensor


class ParameterStore:
    """Mapping from a slash-separated path to a trainable :class:`Tensor`."""

    def __init__(self, params=None):
        self._params: dict[str, Tensor] = {}
        for name, value in (params or {}).items():
            self.add(name, value)

    def add(self, name: str, value) -> Tensor:
        if name in self._params:
            raise KeyError(f"duplicate parameter name {name!r}")
        t = value if isinstance(value, Tensor) else Tensor(value, requires_grad=True)
        t.requires_grad = True
        if t.grad is None or t.grad.shape != t.data.shape:
            t.grad = np.zeros_like(t.data)
        t.name = name
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def __iter__(self):
        return iter(sorted(self._params))

    def names(self) -> list[str]:
        return sorted(self._params)

    def items(self):
        return [(k, self._params[k]) for k in self.names()]

    def zero_grad(self):
        for t in self._params.values():
            t.grad = np.zeros_like(t.data)

    def grads(self) -> dict[str, np.ndarray]:
        return {k: t.grad.copy() for k, t in self.items()}

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.items()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        missing = set(self._params) ^ set(state)
        if missing:
            raise KeyError(f"parameter names differ: {sorted(missing)}")
        for k, arr in state.items():
            if arr.shape != self._params[k].shape:
                raise ValueError(f"{k}: shape {arr.shape} != {self._params[k].shape}")
            self._params[k].data = np.array(arr, dtype=self._params[k].data.dtype)

    def num_elements(self) -> int:
        return int(sum(t.size for t in self._params.values()))

    def sq_norm(self) -> float:
        return float(sum(np.sum(t.data * t.data) for t in self._params.values()))

"""Parameter containers and the layers used by the models."""
from __future__ import annotations

from typing import Iterator, Sequence

import numpy as np

from . import tensor as T
from .tensor import Tensor, parameter


class Module:
    """Attribute-registered parameters and submodules, walked in definition order."""

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for name, value in vars(self).items():
            full = f"{prefix}{name}"
            if isinstance(value, Tensor) and value.requires_grad:
                yield full, value
            elif isinstance(value, Module):
                yield from value.named_parameters(full + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{full}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        extra = set(state) - set(own)
        if missing or extra:
            raise KeyError(f"state mismatch: missing={sorted(missing)} unexpected={sorted(extra)}")
        for k, p in own.items():
            arr = np.asarray(state[k], dtype=np.float64)
            if arr.shape != p.shape:
                raise ValueError(f"{k}: shape {arr.shape} != {p.shape}")
            p.data = arr.copy()


def _uniform(rng: np.random.Generator, shape, scale: float) -> Tensor:
    return parameter(rng.uniform(-scale, scale, size=shape))


class Embedding(Module):
    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator, scale: float = 0.1):
        self.weight = _uniform(rng, (vocab_size, dim), scale)

    def __call__(self, ids) -> Tensor:
        return T.embedding(self.weight, ids)

    def soft(self, probs: Tensor) -> Tensor:
        """Expected embedding under per-row distributions ``probs`` (B, V)."""
        return T.matmul(probs, self.weight)


class Linear(Module):
    def __init__(self, d_in: int, d_out: int, rng: np.random.Generator, scale: float = 0.1):
        self.weight = _uniform(rng, (d_in, d_out), scale)
        self.bias = parameter(np.zeros(d_out))

    def __call__(self, x: Tensor) -> Tensor:
        return T.add(T.matmul(x, self.weight), self.bias)


class LSTMCell(Module):
    def __init__(self, d_in: int, hidden: int, rng: np.random.Generator, scale: float = 0.1, forget_bias: float = 1.0):
        self.hidden = hidden
        self.W = _uniform(rng, (d_in, 4 * hidden), scale)
        self.U = _uniform(rng, (hidden, 4 * hidden), scale)
        b = np.zeros(4 * hidden)
        b[hidden:2 * hidden] = forget_bias
        self.b = parameter(b)

    def __call__(self, x: Tensor, state: Tensor, mask=None) -> Tensor:
        return T.lstm_cell(x, state, self.W, self.U, self.b, mask)

    def zero_state(self, batch: int) -> Tensor:
        return Tensor(np.zeros((batch, 2 * self.hidden)))

    def h(self, state: Tensor) -> Tensor:
        return T.getitem(state, (slice(None), slice(0, self.hidden)))


class LSTM(Module):
    """Stack of LSTM cells stepped one time slice at a time; state is a list per layer."""

    def __init__(self, d_in: int, hidden: int, layers: int, rng: np.random.Generator, scale: float = 0.1):
        if layers < 1:
            raise ValueError("layers must be >= 1")
        self.hidden = hidden
        self.cells = [LSTMCell(d_in if i == 0 else hidden, hidden, rng, scale) for i in range(layers)]

    def zero_state(self, batch: int) -> list[Tensor]:
        return [c.zero_state(batch) for c in self.cells]

    def step(self, x: Tensor, states: Sequence[Tensor], mask=None) -> tuple[Tensor, list[Tensor]]:
        new = []
        inp = x
        for cell, st in zip(self.cells, states):
            st = cell(inp, st, mask)
            new.append(st)
            inp = cell.h(st)
        return inp, new

    def run(self, inputs: Sequence[Tensor], states: Sequence[Tensor], mask=None):
        """Steps over ``inputs``; ``mask`` is (B, T) or None. Returns (top hiddens, final states)."""
        outs = []
        for t, x in enumerate(inputs):
            h, states = self.step(x, states, None if mask is None else mask[:, t])
            outs.append(h)
        return outs, list(states)

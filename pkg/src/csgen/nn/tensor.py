"""Dense float64 tensors with a reverse-mode tape.

Each op builds its output eagerly and, while grad mode is on, records its
parents and a closure that pushes the output gradient back to them.
``Tensor.backward`` walks the recorded graph in reverse topological order.
"""
from __future__ import annotations

import contextlib
from typing import Callable, Sequence

import numpy as np

from ..errors import NumericError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def grad_enabled() -> bool:
    return _GRAD_ENABLED


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "op")

    def __init__(self, data, requires_grad: bool = False, op: str = "leaf"):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: Callable[[np.ndarray], None] | None = None
        self.op = op

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        return float(self.data)

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self.op}, requires_grad={self.requires_grad})"

    def zero_grad(self):
        self.grad = None

    def _accum(self, g: np.ndarray):
        if self.grad is None:
            self.grad = np.array(g, dtype=np.float64, copy=True)
        else:
            self.grad += g

    def backward(self, grad: np.ndarray | None = None):
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if id(p) not in seen:
                    stack.append((p, False))
        self._accum(grad)
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if node._parents:
                    # interior gradients are not needed once propagated
                    node.grad = None

    # operator sugar
    def __add__(self, other):
        return add(self, as_tensor(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, as_tensor(other))

    def __rsub__(self, other):
        return sub(as_tensor(other), self)

    def __mul__(self, other):
        return mul(self, as_tensor(other))

    __rmul__ = __mul__

    def __neg__(self):
        return mul(self, as_tensor(-1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def parameter(data) -> Tensor:
    return Tensor(data, requires_grad=True, op="param")


def _check(op: str, out: np.ndarray):
    if not np.all(np.isfinite(out)):
        raise NumericError(op)


def _node(op: str, out: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    _check(op, out)
    t = Tensor(out, op=op)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        t.requires_grad = True
        t._parents = tuple(parents)
        t._backward = backward
    return t


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _shape_error(op: str, *shapes):
    return ValueError(f"{op}: incompatible shapes {' vs '.join(map(str, shapes))}")


def _broadcast_shape(op: str, a: Tensor, b: Tensor):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise _shape_error(op, a.shape, b.shape) from None


def add(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("add", a, b)

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g, b.shape))

    return _node("add", a.data + b.data, (a, b), bw)


def sub(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("sub", a, b)

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(-g, b.shape))

    return _node("sub", a.data - b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    _broadcast_shape("mul", a, b)

    def bw(g):
        if a.requires_grad:
            a._accum(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accum(_unbroadcast(g * a.data, b.shape))

    return _node("mul", a.data * b.data, (a, b), bw)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise _shape_error("matmul", a.shape, b.shape)

    def bw(g):
        if a.requires_grad:
            a._accum(g @ b.data.T)
        if b.requires_grad:
            b._accum(a.data.T @ g)

    return _node("matmul", a.data @ b.data, (a, b), bw)


def sigmoid(x: Tensor) -> Tensor:
    out = _sigmoid(x.data)

    def bw(g):
        x._accum(g * out * (1.0 - out))

    return _node("sigmoid", out, (x,), bw)


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)

    def bw(g):
        x._accum(g * (1.0 - out * out))

    return _node("tanh", out, (x,), bw)


def exp(x: Tensor) -> Tensor:
    with np.errstate(over="ignore"):
        out = np.exp(x.data)

    def bw(g):
        x._accum(g * out)

    return _node("exp", out, (x,), bw)


def log(x: Tensor) -> Tensor:
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(x.data)

    def bw(g):
        x._accum(g / x.data)

    return _node("log", out, (x,), bw)


def softmax(x: Tensor, axis: int = -1, temperature: float = 1.0) -> Tensor:
    out = _softmax(x.data / temperature, axis)

    def bw(g):
        dot = (g * out).sum(axis=axis, keepdims=True)
        x._accum(out * (g - dot) / temperature)

    return _node("softmax", out, (x,), bw)


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    out = _log_softmax(x.data, axis)

    def bw(g):
        x._accum(g - np.exp(out) * g.sum(axis=axis, keepdims=True))

    return _node("log_softmax", out, (x,), bw)


def embedding(table: Tensor, ids) -> Tensor:
    """Row lookup ``table[ids]``; ``ids`` is an integer array of any shape."""
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.shape[0]):
        raise IndexError(f"embedding: id out of range [0, {table.shape[0]})")

    def bw(g):
        if table.grad is None:
            table.grad = np.zeros_like(table.data)
        np.add.at(table.grad, ids.reshape(-1), g.reshape(-1, table.shape[1]))

    return _node("embedding", table.data[ids], (table,), bw)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    datas = [t.data for t in tensors]
    try:
        out = np.concatenate(datas, axis=axis)
    except ValueError:
        raise _shape_error("concat", *[d.shape for d in datas]) from None
    bounds = np.cumsum([0] + [d.shape[axis] for d in datas])

    def bw(g):
        for t, lo, hi in zip(tensors, bounds[:-1], bounds[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(lo, hi)
                t._accum(g[tuple(sl)])

    return _node("concat", out, tuple(tensors), bw)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    out = np.stack([t.data for t in tensors], axis=axis)

    def bw(g):
        for i, t in enumerate(tensors):
            if t.requires_grad:
                t._accum(np.take(g, i, axis=axis))

    return _node("stack", out, tuple(tensors), bw)


def getitem(x: Tensor, idx) -> Tensor:
    out = x.data[idx]

    def bw(g):
        acc = np.zeros_like(x.data)
        np.add.at(acc, idx, g)
        x._accum(acc)

    return _node("slice", np.array(out, copy=True), (x,), bw)


def reshape(x: Tensor, shape) -> Tensor:
    def bw(g):
        x._accum(g.reshape(x.shape))

    return _node("reshape", x.data.reshape(shape), (x,), bw)


def tsum(x: Tensor, axis=None) -> Tensor:
    out = np.asarray(x.data.sum(axis=axis))

    def bw(g):
        gg = g if axis is None else np.expand_dims(g, axis)
        x._accum(np.broadcast_to(gg, x.shape))

    return _node("sum", out, (x,), bw)


def mean(x: Tensor) -> Tensor:
    n = x.data.size

    def bw(g):
        x._accum(np.broadcast_to(g / n, x.shape))

    return _node("mean", np.asarray(x.data.mean()), (x,), bw)


def lstm_cell(x: Tensor, state: Tensor, W: Tensor, U: Tensor, b: Tensor, mask=None) -> Tensor:
    """Fused LSTM step on a packed state ``[h | c]`` of shape (B, 2H).

    Gate order is input, forget, candidate, output. Rows where ``mask`` is 0
    carry the previous state through unchanged.
    """
    B, H2 = state.shape
    H = H2 // 2
    if W.shape != (x.shape[1], 4 * H) or U.shape != (H, 4 * H) or b.shape != (4 * H,) or x.shape[0] != B:
        raise _shape_error("lstm_cell", x.shape, state.shape, W.shape, U.shape, b.shape)
    h, c = state.data[:, :H], state.data[:, H:]
    z = x.data @ W.data + h @ U.data + b.data
    i = _sigmoid(z[:, :H])
    f = _sigmoid(z[:, H:2 * H])
    gg = np.tanh(z[:, 2 * H:3 * H])
    o = _sigmoid(z[:, 3 * H:])
    c_new = f * c + i * gg
    tc = np.tanh(c_new)
    h_new = o * tc
    if mask is not None:
        m = np.asarray(mask, dtype=np.float64).reshape(B, 1)
        h_out = m * h_new + (1.0 - m) * h
        c_out = m * c_new + (1.0 - m) * c
    else:
        m = None
        h_out, c_out = h_new, c_new
    out = np.concatenate([h_out, c_out], axis=1)

    def bw(g):
        dh_out, dc_out = g[:, :H], g[:, H:]
        if m is not None:
            dh, dc = m * dh_out, m * dc_out
            dh_keep, dc_keep = (1.0 - m) * dh_out, (1.0 - m) * dc_out
        else:
            dh, dc = dh_out, dc_out
            dh_keep = dc_keep = 0.0
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        dz = np.concatenate(
            [dc * gg * i * (1.0 - i), dc * c * f * (1.0 - f), dc * i * (1.0 - gg * gg), do * o * (1.0 - o)],
            axis=1,
        )
        if x.requires_grad:
            x._accum(dz @ W.data.T)
        if state.requires_grad:
            state._accum(np.concatenate([dz @ U.data.T + dh_keep, dc * f + dc_keep], axis=1))
        if W.requires_grad:
            W._accum(x.data.T @ dz)
        if U.requires_grad:
            U._accum(h.T @ dz)
        if b.requires_grad:
            b._accum(dz.sum(axis=0))

    return _node("lstm_cell", out, (x, state, W, U, b), bw)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def _log_softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    z = x - x.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))

"""Fused loss functions: token cross-entropy, mean L1, and sigmoid binary cross-entropy."""
from __future__ import annotations

import numpy as np

from .tensor import Tensor, _log_softmax, _node, _shape_error


def cross_entropy(logits: Tensor, targets, ignore_index: int | None = 0, reduction: str = "mean") -> Tensor:
    """Cross-entropy of ``logits`` (N, V) against integer ``targets`` (N,).

    Positions equal to ``ignore_index`` contribute nothing. ``reduction`` is
    "mean" over the counted positions or "sum".
    """
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    N, V = logits.shape
    if targets.shape[0] != N:
        raise _shape_error("cross_entropy", logits.shape, targets.shape)
    if targets.size and (targets.min() < 0 or targets.max() >= V):
        raise IndexError(f"cross_entropy: target out of range [0, {V})")
    keep = np.ones(N, dtype=bool) if ignore_index is None else targets != ignore_index
    count = int(keep.sum())
    logp = _log_softmax(logits.data, axis=1)
    picked = logp[np.arange(N), targets]
    total = -(picked * keep).sum()
    scale = 1.0 / count if (reduction == "mean" and count) else 1.0
    if reduction not in ("mean", "sum"):
        raise ValueError(f"unknown reduction {reduction!r}")

    def bw(g):
        grad = np.exp(logp)
        grad[np.arange(N), targets] -= 1.0
        grad *= keep[:, None] * (scale * g)
        logits._accum(grad)

    return _node("cross_entropy", np.asarray(total * scale), (logits,), bw)


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Mean absolute difference."""
    if a.shape != b.shape:
        raise _shape_error("l1_loss", a.shape, b.shape)
    diff = a.data - b.data
    n = diff.size

    def bw(g):
        s = np.sign(diff) * (g / n)
        if a.requires_grad:
            a._accum(s)
        if b.requires_grad:
            b._accum(-s)

    return _node("l1_loss", np.asarray(np.abs(diff).mean()), (a, b), bw)


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def bce_with_logits(logits: Tensor, real: bool) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) against an all-real or all-fake label."""
    x = logits.data
    loss = _softplus(-x) if real else _softplus(x)
    n = x.size

    def bw(g):
        sig = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        logits._accum((sig - (1.0 if real else 0.0)) * (g / n))

    return _node("bce", np.asarray(loss.mean()), (logits,), bw)

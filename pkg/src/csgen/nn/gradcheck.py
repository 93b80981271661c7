"""Central finite-difference gradient checking."""
from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def grad_check(
    f: Callable[[], Tensor],
    params: Tensor | Sequence[Tensor],
    h: float = 1e-5,
    max_coords: int | None = None,
    rng: np.random.Generator | None = None,
) -> float:
    """Max over coordinates of |g_fd - g| / max(1, |g_fd|, |g|).

    ``f`` rebuilds the scalar objective from the current parameter values.
    ``max_coords`` limits the check to a random subset of coordinates per tensor.
    """
    if h <= 0:
        raise ValueError("h must be positive")
    params = [params] if isinstance(params, Tensor) else list(params)
    for p in params:
        p.grad = None
    f().backward()
    analytic = [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]
    worst = 0.0
    rng = rng or np.random.default_rng(0)
    for p, g in zip(params, analytic):
        flat = p.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = rng.choice(flat.size, size=max_coords, replace=False)
        for k in coords:
            orig = flat[k]
            flat[k] = orig + h
            fp = f().item()
            flat[k] = orig - h
            fm = f().item()
            flat[k] = orig
            fd = (fp - fm) / (2 * h)
            an = g.reshape(-1)[k]
            err = abs(fd - an) / max(1.0, abs(fd), abs(an))
            worst = max(worst, err)
    for p in params:
        p.grad = None
    return worst

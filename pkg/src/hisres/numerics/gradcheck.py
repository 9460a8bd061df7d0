"""Finite-difference verification of reverse-mode gradients."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from hisres.numerics.tensor import Tensor, no_grad


def relative_error(analytic: np.ndarray, numeric: np.ndarray, floor: float = 1e-6) -> np.ndarray:
    """``|a - n| / max(|a|, |n|, floor)``; the floor keeps near-zero entries meaningful."""
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom


def grad_check(f: Callable[[], Tensor], inputs: Sequence[Tensor], eps: float = 1e-5,
               max_coords: Optional[int] = None, rng: Optional[np.random.Generator] = None,
               floor: float = 1e-6) -> float:
    """Max relative error between backprop and central differences.

    ``f`` is re-evaluated with each probed coordinate of each input nudged by
    ``±eps``. With ``max_coords`` only that many coordinates per input are
    probed, chosen by ``rng``.
    """
    for t in inputs:
        t.grad = None
    out = f()
    if out.data.size != 1:
        raise ValueError("grad_check needs a scalar-valued function")
    out.backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in inputs]

    worst = 0.0
    rng = rng or np.random.default_rng(0)
    for t, a in zip(inputs, analytic):
        flat = t.data.reshape(-1)
        coords = np.arange(flat.size)
        if max_coords is not None and flat.size > max_coords:
            coords = np.sort(rng.choice(flat.size, size=max_coords, replace=False))
        numeric = np.empty(coords.size)
        with no_grad():
            for n, i in enumerate(coords):
                orig = flat[i]
                flat[i] = orig + eps
                up = float(f().data)
                flat[i] = orig - eps
                down = float(f().data)
                flat[i] = orig
                numeric[n] = (up - down) / (2 * eps)
        err = relative_error(a.reshape(-1)[coords], numeric, floor)
        if err.size:
            worst = max(worst, float(err.max()))
    return worst

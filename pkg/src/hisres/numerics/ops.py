"""Differentiable operations on :class:`~hisres.numerics.tensor.Tensor`.

Every function takes tensors (or array-likes, treated as constants) and
returns a new tensor whose backward closure produces one gradient per parent.
Index arguments (rows, segment ids, targets) are plain integer arrays.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from hisres.errors import DimensionError
from hisres.numerics.tensor import Tensor, as_tensor

ACTIVATIONS = ("rrelu", "leaky_relu", "sigmoid", "tanh", "cosine")
RRELU_LOWER = 1.0 / 8.0
RRELU_UPPER = 1.0 / 3.0
LEAKY_SLOPE = 0.2


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(a: Tensor, b: Tensor, op: str) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from exc


# -- elementwise arithmetic -------------------------------------------------

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "add")
    sa, sb = a.shape, b.shape
    return Tensor._from_op(a.data + b.data, (a, b),
                           lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "sub")
    sa, sb = a.shape, b.shape
    return Tensor._from_op(a.data - b.data, (a, b),
                           lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub")


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "mul")
    ad, bd = a.data, b.data
    return Tensor._from_op(ad * bd, (a, b),
                           lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _check_broadcast(a, b, "div")
    ad, bd = a.data, b.data
    out = ad / bd
    return Tensor._from_op(out, (a, b),
                           lambda g: (_unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)), "div")


def exp(x: Tensor) -> Tensor:
    out = np.exp(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * out,), "exp")


def log(x: Tensor) -> Tensor:
    xd = x.data
    return Tensor._from_op(np.log(xd), (x,), lambda g: (g / xd,), "log")


# -- linear algebra ---------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2-D matrix product."""
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul: incompatible shapes {a.shape} and {b.shape}")
    ad, bd = a.data, b.data
    return Tensor._from_op(ad @ bd, (a, b), lambda g: (g @ bd.T, ad.T @ g), "matmul")


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise DimensionError("transpose expects a matrix")
    return Tensor._from_op(a.data.T, (a,), lambda g: (g.T,), "transpose")


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Row-wise ``x @ weight.T + bias`` with ``weight`` stored as (out, in)."""
    if x.ndim != 2 or weight.ndim != 2 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"linear: input {x.shape} vs weight {weight.shape}")
    xd, wd = x.data, weight.data
    out = xd @ wd.T
    if bias is None:
        return Tensor._from_op(out, (x, weight), lambda g: (g @ wd, g.T @ xd), "linear")
    if bias.shape != (wd.shape[0],):
        raise DimensionError(f"linear: bias {bias.shape} vs weight {weight.shape}")
    out = out + bias.data
    return Tensor._from_op(out, (x, weight, bias),
                           lambda g: (g @ wd, g.T @ xd, g.sum(axis=0)), "linear")


# -- shape manipulation -----------------------------------------------------

def reshape(x: Tensor, shape: Sequence[int]) -> Tensor:
    old = x.shape
    return Tensor._from_op(x.data.reshape(shape), (x,), lambda g: (g.reshape(old),), "reshape")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from exc
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return Tensor._from_op(out, tensors, backward, "concat")


def take_rows(x: Tensor, idx) -> Tensor:
    """Gather rows ``x[idx]`` along the first axis."""
    idx = np.asarray(idx, dtype=np.int64)
    n = x.shape[0]
    if idx.size and (idx.min() < -n or idx.max() >= n):
        raise IndexError(f"take_rows: index out of range for {n} rows")
    shape = x.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, idx, g)
        return (out,)

    return Tensor._from_op(x.data[idx], (x,), backward, "take_rows")


def segment_sum(x: Tensor, segments, num_segments: int) -> Tensor:
    """Sum rows of ``x`` into ``num_segments`` buckets given by ``segments``."""
    seg = np.asarray(segments, dtype=np.int64)
    if seg.shape[0] != x.shape[0]:
        raise DimensionError("segment_sum: one segment id per row required")
    if seg.size and (seg.min() < 0 or seg.max() >= num_segments):
        raise IndexError("segment_sum: segment id out of range")
    out = np.zeros((num_segments,) + x.shape[1:])
    np.add.at(out, seg, x.data)
    return Tensor._from_op(out, (x,), lambda g: (g[seg],), "segment_sum")


def segment_softmax(scores: Tensor, segments, num_segments: int) -> Tensor:
    """Softmax of a score vector within each segment (edges grouped by target)."""
    seg = np.asarray(segments, dtype=np.int64)
    s = scores.data
    if s.ndim != 1 or s.shape[0] != seg.shape[0]:
        raise DimensionError("segment_softmax expects one score per segment id")
    peak = np.full(num_segments, -np.inf)
    np.maximum.at(peak, seg, s)
    e = np.exp(s - peak[seg])
    denom = np.zeros(num_segments)
    np.add.at(denom, seg, e)
    out = e / denom[seg]

    def backward(g):
        dots = np.zeros(num_segments)
        np.add.at(dots, seg, g * out)
        return (out * (g - dots[seg]),)

    return Tensor._from_op(out, (scores,), backward, "segment_softmax")


def tsum(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    shape = x.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor._from_op(np.asarray(x.data.sum(axis=axis, keepdims=keepdims)), (x,), backward, "sum")


def mean(x: Tensor, axis: Optional[int] = None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else x.shape[axis]
    return mul(tsum(x, axis=axis, keepdims=keepdims), 1.0 / count)


# -- activations --------------------------------------------------------------

def sigmoid(x: Tensor) -> Tensor:
    xd = x.data
    out = np.empty_like(xd)
    pos = xd >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xd[pos]))
    ez = np.exp(xd[~pos])
    out[~pos] = ez / (1.0 + ez)
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    out = np.tanh(x.data)
    return Tensor._from_op(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def cosine(x: Tensor) -> Tensor:
    xd = x.data
    return Tensor._from_op(np.cos(xd), (x,), lambda g: (-g * np.sin(xd),), "cosine")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._from_op(x.data * mask, (x,), lambda g: (g * mask,), "relu")


def leaky_relu(x: Tensor, slope: float = LEAKY_SLOPE) -> Tensor:
    factor = np.where(x.data >= 0, 1.0, slope)
    return Tensor._from_op(x.data * factor, (x,), lambda g: (g * factor,), "leaky_relu")


def rrelu(x: Tensor, lower: float = RRELU_LOWER, upper: float = RRELU_UPPER,
          training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Randomized leaky ReLU.

    In training mode a negative slope is drawn per element from U(lower, upper)
    using ``rng``; in eval mode the slope is the midpoint of the range. The
    slopes actually applied are kept for the backward pass.
    """
    if training:
        if rng is None:
            raise ValueError("rrelu in training mode needs an rng")
        slopes = rng.uniform(lower, upper, size=x.shape)
    else:
        slopes = (lower + upper) / 2.0
    factor = np.where(x.data >= 0, 1.0, slopes)
    return Tensor._from_op(x.data * factor, (x,), lambda g: (g * factor,), "rrelu")


def activation(x: Tensor, kind: str, **kwargs) -> Tensor:
    if kind == "rrelu":
        return rrelu(x, **kwargs)
    if kind == "leaky_relu":
        return leaky_relu(x, **kwargs)
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    if kind == "cosine":
        return cosine(x)
    raise ValueError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator]) -> Tensor:
    """Inverted dropout; identity outside training or at rate 0."""
    if not training or rate <= 0.0:
        return x
    keep = 1.0 - rate
    mask = (rng.random(x.shape) < keep) / keep
    return Tensor._from_op(x.data * mask, (x,), lambda g: (g * mask,), "dropout")


# -- normalisation and losses -------------------------------------------------

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    out = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (out * (g - (g * out).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(out, (x,), backward, "softmax")


def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shifted = x.data - x.data.max(axis=axis, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=axis, keepdims=True))
    out = shifted - lse
    probs = np.exp(out)

    def backward(g):
        return (g - probs * g.sum(axis=axis, keepdims=True),)

    return Tensor._from_op(out, (x,), backward, "log_softmax")


def cross_entropy(logits: Tensor, targets) -> Tensor:
    """Mean negative log-likelihood of integer ``targets`` under row softmax."""
    if logits.ndim != 2:
        raise DimensionError("cross_entropy expects (batch, classes) logits")
    targets = np.asarray(targets, dtype=np.int64)
    batch, classes = logits.shape
    if targets.shape != (batch,):
        raise DimensionError("cross_entropy: one target per row required")
    if targets.size and (targets.min() < 0 or targets.max() >= classes):
        raise IndexError("cross_entropy: target class out of range")
    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    lse = np.log(np.exp(shifted).sum(axis=1))
    rows = np.arange(batch)
    loss = np.mean(lse - shifted[rows, targets])
    probs = np.exp(shifted - lse[:, None])

    def backward(g):
        grad = probs.copy()
        grad[rows, targets] -= 1.0
        return (grad * (g / batch),)

    return Tensor._from_op(np.asarray(loss), (logits,), backward, "cross_entropy")


# -- convolution --------------------------------------------------------------

def conv1d(signal: Tensor, kernels: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """Same-padded 1-D cross-correlation.

    ``signal`` is (channels, d) or (batch, channels, d); ``kernels`` is
    (out_channels, channels, k) with odd k. Returns (out_channels, d) or
    (batch, out_channels, d) matching the input rank.
    """
    x = signal.data
    unbatched = x.ndim == 2
    if unbatched:
        x = x[None]
    w = kernels.data
    if x.ndim != 3 or w.ndim != 3 or w.shape[1] != x.shape[1]:
        raise DimensionError(f"conv1d: signal {signal.shape} vs kernels {kernels.shape}")
    k = w.shape[2]
    if k % 2 == 0:
        raise DimensionError("conv1d: kernel width must be odd for same padding")
    if bias is not None and bias.shape != (w.shape[0],):
        raise DimensionError("conv1d: one bias per output channel")
    pad = k // 2
    d = x.shape[2]
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad)))
    # cols[b, c, j, i] = xp[b, c, i + j]
    cols = np.stack([xp[:, :, j:j + d] for j in range(k)], axis=2)
    out = np.einsum("bcji,ocj->boi", cols, w, optimize=True)
    if bias is not None:
        out = out + bias.data[None, :, None]

    def backward(g):
        g3 = g[None] if unbatched else g
        dw = np.einsum("boi,bcji->ocj", g3, cols, optimize=True)
        dcols = np.einsum("boi,ocj->bcji", g3, w, optimize=True)
        dxp = np.zeros_like(xp)
        for j in range(k):
            dxp[:, :, j:j + d] += dcols[:, :, j, :]
        dx = dxp[:, :, pad:pad + d]
        if unbatched:
            dx = dx[0]
        grads = [dx, dw]
        if bias is not None:
            grads.append(g3.sum(axis=(0, 2)))
        return tuple(grads)

    parents = (signal, kernels) if bias is None else (signal, kernels, bias)
    return Tensor._from_op(out[0] if unbatched else out, parents, backward, "conv1d")

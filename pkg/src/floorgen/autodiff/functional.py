"""Differentiable operations on :class:`Tensor`.

Only the operations the generator, discriminator and losses need are
provided. Elementwise binary ops broadcast with numpy rules; their backward
sums the gradient back down to each operand's shape.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erf

from ..errors import ConfigurationError, DimensionError
from .tensor import Tensor, as_tensor

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# ---------------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(g, sb)

    return Tensor._from_op(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    sa, sb = a.shape, b.shape

    def backward(g):
        return _unbroadcast(g, sa), _unbroadcast(-g, sb)

    return Tensor._from_op(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data

    def backward(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return Tensor._from_op(ad * bd, (a, b), backward)


def scale(a: Tensor, factor: float) -> Tensor:
    """Multiply by a fixed Python scalar."""
    factor = float(factor)

    def backward(g):
        return (g * factor,)

    return Tensor._from_op(a.data * factor, (a,), backward)


def add_n(tensors: Sequence[Tensor]) -> Tensor:
    """Elementwise sum of equally shaped tensors."""
    tensors = [as_tensor(t) for t in tensors]
    shape = tensors[0].shape
    for t in tensors[1:]:
        if t.shape != shape:
            raise DimensionError(f"add_n shape mismatch: {shape} vs {t.shape}")
    out = tensors[0].data.copy()
    for t in tensors[1:]:
        out += t.data

    def backward(g):
        return tuple(g for _ in tensors)

    return Tensor._from_op(out, tensors, backward)


def square(a: Tensor) -> Tensor:
    ad = a.data

    def backward(g):
        return (2.0 * ad * g,)

    return Tensor._from_op(ad * ad, (a,), backward)


def sigmoid(a: Tensor) -> Tensor:
    y = _sigmoid(a.data)

    def backward(g):
        return (g * y * (1.0 - y),)

    return Tensor._from_op(y, (a,), backward)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def leaky_relu(a: Tensor, slope: float = 0.1) -> Tensor:
    ad = a.data
    factor = np.where(ad > 0, 1.0, slope)

    def backward(g):
        return (g * factor,)

    return Tensor._from_op(ad * factor, (a,), backward)


def gelu(a: Tensor) -> Tensor:
    """Exact GeLU, ``x * Phi(x)`` with the erf-based normal CDF."""
    x = a.data
    cdf = 0.5 * (1.0 + erf(x / _SQRT2))

    def backward(g):
        pdf = _INV_SQRT_2PI * np.exp(-0.5 * x * x)
        return (g * (cdf + x * pdf),)

    return Tensor._from_op(x * cdf, (a,), backward)


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        return (y * (g - (g * y).sum(axis=axis, keepdims=True)),)

    return Tensor._from_op(y, (a,), backward)


# ------------------------------------------------------------------ reductions

def sum(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:  # noqa: A001
    shape = a.shape

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, shape).copy(),)

    return Tensor._from_op(np.asarray(a.data.sum(axis=axis, keepdims=keepdims)), (a,), backward)


def mean(a: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    if axis is None:
        count = a.size
    else:
        axes = (axis,) if isinstance(axis, int) else tuple(axis)
        count = int(np.prod([a.shape[ax] for ax in axes]))
    return scale(sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def frobenius_norm(a: Tensor) -> Tensor:
    """sqrt of the sum of squares; the gradient at the origin is taken as 0."""
    ad = a.data
    norm = float(np.sqrt((ad * ad).sum()))

    def backward(g):
        if norm == 0.0:
            return (np.zeros_like(ad),)
        return (g * ad / norm,)

    return Tensor._from_op(np.asarray(norm), (a,), backward)


def bce_with_logits(logits: Tensor, targets) -> Tensor:
    """Mean elementwise binary cross-entropy, computed stably from logits."""
    x = logits.data
    y = np.asarray(targets.data if isinstance(targets, Tensor) else targets, dtype=np.float64)
    if y.shape != x.shape:
        raise DimensionError(f"bce_with_logits shape mismatch: {x.shape} vs {y.shape}")
    loss = np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x)))
    n = x.size

    def backward(g):
        return (g * (_sigmoid(x) - y) / n,)

    return Tensor._from_op(np.asarray(loss.mean()), (logits,), backward)


# --------------------------------------------------------------------- shaping

def reshape(a: Tensor, shape) -> Tensor:
    old = a.shape

    def backward(g):
        return (g.reshape(old),)

    return Tensor._from_op(a.data.reshape(shape), (a,), backward)


def transpose(a: Tensor, axes: Optional[Sequence[int]] = None) -> Tensor:
    if axes is None:
        axes = tuple(reversed(range(a.ndim)))
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))

    def backward(g):
        return (g.transpose(inverse),)

    return Tensor._from_op(a.data.transpose(axes), (a,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    sizes = [t.shape[axis] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        return tuple(np.split(g, splits, axis=axis))

    return Tensor._from_op(np.concatenate([t.data for t in tensors], axis=axis), tensors, backward)


def index_rows(a: Tensor, rows) -> Tensor:
    """Select entries along axis 0 (gather); backward scatters back."""
    rows = np.asarray(rows, dtype=np.intp)
    shape = a.shape

    def backward(g):
        out = np.zeros(shape)
        np.add.at(out, rows, g)
        return (out,)

    return Tensor._from_op(a.data[rows], (a,), backward)


# ---------------------------------------------------------------- linear maps

def matmul(a, b) -> Tensor:
    """Matrix product of 2-D operands, or batched when either side has leading dims."""
    a, b = as_tensor(a), as_tensor(b)
    ok = a.ndim >= 2 and b.ndim >= 2 and a.shape[-1] == b.shape[-2]
    if ok and a.ndim > 2 and b.ndim > 2:
        ok = a.shape[:-2] == b.shape[:-2]
    if not ok:
        raise DimensionError(f"matmul dimension mismatch: {a.shape} @ {b.shape}")
    ad, bd = a.data, b.data

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = g @ np.swapaxes(bd, -1, -2)
            if ad.ndim == 2 and ga.ndim > 2:
                ga = ga.reshape(-1, *ad.shape).sum(axis=0)
        if b.requires_grad:
            gb = np.swapaxes(ad, -1, -2) @ g
            if bd.ndim == 2 and gb.ndim > 2:
                gb = gb.reshape(-1, *bd.shape).sum(axis=0)
        return ga, gb

    return Tensor._from_op(ad @ bd, (a, b), backward)


def linear(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None) -> Tensor:
    """``x @ weight.T + bias`` with ``weight`` shaped (out, in)."""
    if x.shape[-1] != weight.shape[1]:
        raise DimensionError(f"linear expects inputs with {weight.shape[1]} features, got {x.shape}")
    out = matmul(x, transpose(weight))
    return out if bias is None else add(out, bias)


def _conv_out(size: int, k: int, stride: int, pad: int) -> int:
    span = size + 2 * pad - k
    if span < 0 or span % stride:
        raise ConfigurationError(
            f"conv2d output size (H+2*pad-k)/stride+1 not integral for H={size}, k={k}, stride={stride}, pad={pad}"
        )
    return span // stride + 1


def _windows(xp: np.ndarray, k: int, stride: int) -> np.ndarray:
    # (N, C, Ho, Wo, k, k) view
    return sliding_window_view(xp, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]


def _conv_forward(x: np.ndarray, w: np.ndarray, stride: int, pad: int) -> np.ndarray:
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _windows(xp, w.shape[2], stride)
    out = np.tensordot(cols, w, axes=([1, 4, 5], [1, 2, 3]))  # N, Ho, Wo, O
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def _conv_input_grad(g: np.ndarray, w: np.ndarray, stride: int, pad: int, in_hw: tuple[int, int]) -> np.ndarray:
    n, _, ho, wo = g.shape
    k = w.shape[2]
    h, wd = in_hw
    gp = np.zeros((n, w.shape[1], h + 2 * pad, wd + 2 * pad))
    for i in range(k):
        for j in range(k):
            contrib = np.tensordot(g, w[:, :, i, j], axes=([1], [0]))  # N, Ho, Wo, C
            gp[:, :, i:i + stride * (ho - 1) + 1:stride, j:j + stride * (wo - 1) + 1:stride] += contrib.transpose(0, 3, 1, 2)
    if pad:
        gp = gp[:, :, pad:pad + h, pad:pad + wd]
    return np.ascontiguousarray(gp)


def _conv_weight_grad(g: np.ndarray, x: np.ndarray, k: int, stride: int, pad: int) -> np.ndarray:
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _windows(xp, k, stride)
    return np.tensordot(g, cols, axes=([0, 2, 3], [0, 2, 3]))  # O, C, k, k


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 1, pad: int = 1) -> Tensor:
    """Cross-correlation of ``(N,C,H,W)`` (or ``(C,H,W)``) input with ``(O,C,k,k)`` weights."""
    if stride not in (1, 2):
        raise ConfigurationError(f"conv2d stride must be 1 or 2, got {stride}")
    squeeze = x.ndim == 3
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[1]:
        raise DimensionError(f"conv2d shape mismatch: input {x.shape}, weight {weight.shape}")
    k = weight.shape[2]
    _conv_out(x.shape[2], k, stride, pad)
    _conv_out(x.shape[3], k, stride, pad)
    xd, wd = x.data, weight.data
    in_hw = xd.shape[2:]

    def backward(g):
        return _conv_input_grad(g, wd, stride, pad, in_hw), _conv_weight_grad(g, xd, k, stride, pad)

    out = Tensor._from_op(_conv_forward(xd, wd, stride, pad), (x, weight), backward)
    if bias is not None:
        out = add(out, reshape(bias, (1, -1, 1, 1)))
    if squeeze:
        out = reshape(out, out.shape[1:])
    return out


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None, stride: int = 2, pad: int = 1) -> Tensor:
    """Transposed convolution, the adjoint of :func:`conv2d` in its input.

    ``weight`` is shaped ``(C_in, C_out, k, k)``; output spatial size is
    ``(H - 1) * stride - 2 * pad + k``, which must equal ``stride * H``.
    """
    squeeze = x.ndim == 3
    if squeeze:
        x = reshape(x, (1,) + x.shape)
    if x.ndim != 4 or weight.ndim != 4 or x.shape[1] != weight.shape[0]:
        raise DimensionError(f"conv_transpose2d shape mismatch: input {x.shape}, weight {weight.shape}")
    k = weight.shape[2]
    h, w = x.shape[2:]
    ho, wo = (h - 1) * stride - 2 * pad + k, (w - 1) * stride - 2 * pad + k
    if ho != stride * h or wo != stride * w:
        raise ConfigurationError(
            f"conv_transpose2d with k={k}, stride={stride}, pad={pad} maps {h}x{w} to {ho}x{wo}, not {stride}x upsampling"
        )
    xd, wd = x.data, weight.data

    def backward(g):
        return _conv_forward(g, wd, stride, pad), _conv_weight_grad(xd, g, k, stride, pad)

    out = Tensor._from_op(_conv_input_grad(xd, wd, stride, pad, (ho, wo)), (x, weight), backward)
    if bias is not None:
        out = add(out, reshape(bias, (1, -1, 1, 1)))
    if squeeze:
        out = reshape(out, out.shape[1:])
    return out

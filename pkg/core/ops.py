"""
Differentiable Operators

The fixed operator set the reconstruction network needs. Every op works with
or without an active tape; without one it is a plain numpy evaluation.
"""

from __future__ import annotations

from contextvars import ContextVar
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from core.errors import ShapeError
from core.tensor import Tensor, record

_kink_monitor: ContextVar[Optional["KinkMonitor"]] = ContextVar("dgdn_kink_monitor", default=None)


class KinkMonitor:
    """Collects the branch pattern of every piecewise op evaluated inside it.

    Two evaluations with identical signatures lie on the same smooth piece of
    the relu/l1 landscape.
    """

    def __init__(self):
        self.patterns: List[np.ndarray] = []
        self._token = None

    def __enter__(self) -> "KinkMonitor":
        self._token = _kink_monitor.set(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _kink_monitor.reset(self._token)

    def signature(self) -> bytes:
        return b"".join(np.packbits(p.ravel()).tobytes() + b"|" for p in self.patterns)


def _note_branches(*patterns: np.ndarray) -> None:
    monitor = _kink_monitor.get()
    if monitor is not None:
        monitor.patterns.extend(patterns)


def _unbroadcast(grad: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _check_broadcast(kind: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape and a.ndim != 0 and b.ndim != 0:
        raise ShapeError(f"{kind}: operand shapes differ", {"a": list(a.shape), "b": list(b.shape)})


def add(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("add", a, b)
    return record(
        "add",
        (a, b),
        a.data + b.data,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
    )


def sub(a: Tensor, b: Tensor) -> Tensor:
    _check_broadcast("sub", a, b)
    return record(
        "sub",
        (a, b),
        a.data - b.data,
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(-g, b.shape)),
    )


def mul(a: Tensor, b: Tensor) -> Tensor:
    """Elementwise product; either operand may be rank-0."""
    _check_broadcast("mul", a, b)

    def _backward(g):
        return (
            _unbroadcast(g * np.conj(b.data), a.shape),
            _unbroadcast(g * np.conj(a.data), b.shape),
        )

    return record("mul", (a, b), a.data * b.data, _backward)


def sum_all(x: Tensor) -> Tensor:
    return record("sum", (x,), np.asarray(x.data.sum()), lambda g: (np.broadcast_to(g, x.shape),))


def relu(x: Tensor) -> Tensor:
    active = x.data > 0
    _note_branches(active)
    return record(
        "relu",
        (x,),
        np.where(active, x.data, 0.0).astype(x.dtype),
        lambda g: (g * active,),
        saved={"active": active},
    )


def softplus(z: Tensor) -> Tensor:
    """ln(1 + exp(z)) without overflow; derivative is the logistic function."""
    data = np.maximum(z.data, 0.0) + np.log1p(np.exp(-np.abs(z.data)))
    return record("softplus", (z,), data, lambda g: (g * expit(z.data),))


def l1_loss(a: Tensor, b: Tensor) -> Tensor:
    """Sum of absolute differences; subgradient 0 at ties."""
    if a.shape != b.shape:
        raise ShapeError("l1_loss: shapes differ", {"a": list(a.shape), "b": list(b.shape)})
    diff = a.data - b.data
    sign = np.sign(diff)
    _note_branches(diff > 0, diff < 0)
    return record(
        "l1_loss",
        (a, b),
        np.asarray(np.abs(diff).sum()),
        lambda g: (g * sign, -g * sign),
        saved={"sign": sign},
    )


def concat_channels(parts: Sequence[Tensor]) -> Tensor:
    if not parts:
        raise ShapeError("concat_channels: no parts given")
    spatial = parts[0].shape[1:]
    for part in parts:
        if part.ndim != 3 or part.shape[1:] != spatial:
            raise ShapeError(
                "concat_channels: spatial extents differ",
                {"expected": list(spatial), "got": list(part.shape)},
            )
    bounds = np.cumsum([0] + [p.shape[0] for p in parts])
    ranges = [(int(lo), int(hi)) for lo, hi in zip(bounds[:-1], bounds[1:])]

    return record(
        "concat_channels",
        tuple(parts),
        np.concatenate([p.data for p in parts], axis=0),
        lambda g: tuple(g[lo:hi] for lo, hi in ranges),
        saved={"ranges": ranges},
    )


def slice_channels(x: Tensor, start: int, stop: int) -> Tensor:
    if x.ndim != 3 or not 0 <= start < stop <= x.shape[0]:
        raise ShapeError("slice_channels: invalid channel range", {"shape": list(x.shape), "range": [start, stop]})

    def _backward(g):
        full = np.zeros(x.shape, dtype=g.dtype)
        full[start:stop] = g
        return (full,)

    return record("slice_channels", (x,), x.data[start:stop], _backward)


def _windows(arr: np.ndarray, kh: int, kw: int) -> np.ndarray:
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    padded = np.pad(arr, ((0, 0), (ph, ph), (pw, pw)))
    return sliding_window_view(padded, (kh, kw), axis=(1, 2))


def conv2d(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Same-size, stride-1 cross-correlation with per-channel bias.

    x: Cin x H x W, kernel: Cout x Cin x kh x kw (odd extents), bias: Cout.
    """
    if x.ndim != 3 or kernel.ndim != 4:
        raise ShapeError("conv2d: expected CxHxW input and 4-d kernel", {"input": list(x.shape), "kernel": list(kernel.shape)})
    c_out, c_in, kh, kw = kernel.shape
    if x.shape[0] != c_in:
        raise ShapeError("conv2d: input channels do not match kernel", {"input": list(x.shape), "kernel": list(kernel.shape)})
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeError("conv2d: kernel extents must be odd", {"kernel": list(kernel.shape)})
    if bias.shape != (c_out,):
        raise ShapeError("conv2d: bias must have one entry per output channel", {"bias": list(bias.shape), "c_out": c_out})

    cols = _windows(x.data, kh, kw)  # Cin x H x W x kh x kw
    out = np.tensordot(kernel.data, cols, axes=([1, 2, 3], [0, 3, 4])) + bias.data[:, None, None]

    def _backward(g):
        grad_bias = g.sum(axis=(1, 2))
        grad_kernel = np.tensordot(g, cols, axes=([1, 2], [1, 2]))
        flipped = kernel.data[:, :, ::-1, ::-1]
        grad_x = np.tensordot(flipped, _windows(g, kh, kw), axes=([0, 2, 3], [0, 3, 4]))
        return grad_x, grad_kernel, grad_bias

    return record("conv2d", (x, kernel, bias), out, _backward)

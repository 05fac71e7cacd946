"""Differentiable primitives the network variants are assembled from.

Feature maps use a channels-last, time-first layout: ``(L, N)`` for the
classic 1-D blocks and ``(L, N, C)`` for the inter-channel blocks.
"""
from __future__ import annotations

import contextlib
from contextvars import ContextVar
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ShapeError
from .tensor import Tensor, _check_axis

LAYER_NORM_EPS = 1e-8
# Pre-activation clamp that keeps float64 sigmoid strictly inside (0, 1).
SIGMOID_CLAMP = 30.0


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")

    def backward(g):
        return g @ b.data.T, a.data.T @ g

    return Tensor._from_op(a.data @ b.data, (a, b), backward)


def pointwise_conv(x: Tensor, axis: int, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """1x1 convolution: a linear map ``in -> out`` applied along ``axis``.

    Every position of the remaining axes is transformed independently, so
    the output keeps the input shape except along ``axis``.
    """
    axis = _check_axis(axis, x.ndim)
    if weight.ndim != 2 or weight.shape[0] != x.shape[axis]:
        raise ShapeError(
            f"pointwise_conv: weight {weight.shape} does not match extent {x.shape[axis]} "
            f"of axis {axis} in input {x.shape}"
        )
    n_in, n_out = weight.shape
    if bias is not None and bias.shape != (n_out,):
        raise ShapeError(f"pointwise_conv: bias {bias.shape} does not match output extent {n_out}")

    xm = np.moveaxis(x.data, axis, -1)
    y = xm @ weight.data
    if bias is not None:
        y = y + bias.data
    out = np.ascontiguousarray(np.moveaxis(y, -1, axis))

    def backward(g):
        gm = np.moveaxis(g, axis, -1)
        gx = np.ascontiguousarray(np.moveaxis(gm @ weight.data.T, -1, axis))
        gw = xm.reshape(-1, n_in).T @ gm.reshape(-1, n_out)
        grads = [gx, gw]
        if bias is not None:
            grads.append(gm.reshape(-1, n_out).sum(axis=0))
        return grads

    parents = (x, weight) if bias is None else (x, weight, bias)
    return Tensor._from_op(out, parents, backward)


def dilated_depthwise_conv2d(x: Tensor, kernel: Tensor, bias: Tensor, dilation: int) -> Tensor:
    """Per-channel 3x3 convolution over (time, feature) of an ``(L, N, C)`` map.

    Taps sit at offsets ``-d, 0, +d`` on both axes and the map is zero
    padded by ``d`` on every side, so the output shape equals the input
    shape. ``kernel[c, i, j]`` weights time offset ``(i-1)*d`` and feature
    offset ``(j-1)*d`` of channel ``c``.
    """
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    if x.ndim != 3:
        raise ShapeError(f"dilated_depthwise_conv2d expects an (L, N, C) map, got {x.shape}")
    L, N, C = x.shape
    if kernel.shape != (C, 3, 3) or bias.shape != (C,):
        raise ShapeError(
            f"dilated_depthwise_conv2d: kernel {kernel.shape} / bias {bias.shape} "
            f"do not match {C} channels (expected ({C}, 3, 3) and ({C},))"
        )
    x_data = x.data
    k = np.ascontiguousarray(kernel.data)
    out = _kernels.depthwise3x3_forward(x_data, k, bias.data, dilation)

    def backward(g):
        return _kernels.depthwise3x3_backward(np.ascontiguousarray(g), x_data, k, dilation)

    return Tensor._from_op(out, (x, kernel, bias), backward)


def depthwise_conv2d_reference(x: np.ndarray, kernel: np.ndarray, bias: np.ndarray, d: int) -> np.ndarray:
    """Plain numpy evaluation of the same convolution via explicit zero padding."""
    L, N, _ = x.shape
    xp = np.pad(x, ((d, d), (d, d), (0, 0)))
    out = np.zeros_like(x)
    for i in range(3):
        for j in range(3):
            out += xp[i * d:i * d + L, j * d:j * d + N, :] * kernel[:, i, j]
    return out + bias


def dilated_depthwise_conv1d(x: Tensor, kernel: Tensor, bias: Tensor, dilation: int) -> Tensor:
    """Per-feature 3-tap convolution along time of an ``(L, N)`` map."""
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    if x.ndim != 2:
        raise ShapeError(f"dilated_depthwise_conv1d expects an (L, N) map, got {x.shape}")
    L, N = x.shape
    if kernel.shape != (N, 3) or bias.shape != (N,):
        raise ShapeError(
            f"dilated_depthwise_conv1d: kernel {kernel.shape} / bias {bias.shape} "
            f"do not match {N} features"
        )
    d = dilation
    xp = np.pad(x.data, ((d, d), (0, 0)))
    k = kernel.data
    out = np.zeros_like(x.data)
    for i in range(3):
        out += xp[i * d:i * d + L, :] * k[:, i]
    out += bias.data

    def backward(g):
        gxp = np.zeros_like(xp)
        gk = np.empty_like(k)
        for i in range(3):
            gxp[i * d:i * d + L, :] += g * k[:, i]
            gk[:, i] = (g * xp[i * d:i * d + L, :]).sum(axis=0)
        return gxp[d:d + L, :], gk, g.sum(axis=0)

    return Tensor._from_op(out, (x, kernel, bias), backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return Tensor._from_op(np.where(mask, x.data, 0.0), (x,), lambda g: (g * mask,))


def prelu(x: Tensor, slope: Tensor) -> Tensor:
    """Leaky rectifier with a single learned ``slope`` (shape ``(1,)``)."""
    if slope.size != 1:
        raise ShapeError(f"prelu takes one shared slope, got shape {slope.shape}")
    a = float(slope.data.reshape(()))
    scale = np.where(x.data >= 0, 1.0, a)
    out = x.data * scale

    def backward(g):
        negative = np.minimum(x.data, 0.0).reshape(-1)
        return g * scale, np.array([np.dot(g.reshape(-1), negative)])

    return Tensor._from_op(out, (x, slope), backward)


def sigmoid(x: Tensor) -> Tensor:
    z = np.clip(x.data, -SIGMOID_CLAMP, SIGMOID_CLAMP)
    out = 1.0 / (1.0 + np.exp(-z))
    inside = np.abs(x.data) <= SIGMOID_CLAMP
    return Tensor._from_op(out, (x,), lambda g: (g * out * (1.0 - out) * inside,))


# --------------------------------------------------------------- layer norm
@dataclass
class NormStatistics:
    """Recorded (mean, variance) pairs, in call order, from one forward pass."""

    entries: list[tuple[float, float]] = field(default_factory=list)
    replay: bool = False
    cursor: int = 0


_active_stats: ContextVar[NormStatistics | None] = ContextVar("_active_stats", default=None)


@contextlib.contextmanager
def record_norm_statistics():
    """Capture the statistics of every layer norm evaluated in the block."""
    stats = NormStatistics()
    token = _active_stats.set(stats)
    try:
        yield stats
    finally:
        _active_stats.reset(token)


@contextlib.contextmanager
def replay_norm_statistics(stats: NormStatistics):
    """Evaluate layer norms with previously recorded, constant statistics.

    Used to probe the convolutional support of a network: with the
    statistics frozen, layer norm becomes a per-element affine map.
    """
    frozen = NormStatistics(entries=list(stats.entries), replay=True)
    token = _active_stats.set(frozen)
    try:
        yield frozen
    finally:
        _active_stats.reset(token)
    if frozen.cursor != len(frozen.entries):
        raise RuntimeError(
            f"replayed {frozen.cursor} of {len(frozen.entries)} recorded normalizations"
        )


def global_layer_norm(x: Tensor, gain: Tensor, bias: Tensor, axis: int = -1) -> Tensor:
    """Normalize with mean/variance over the whole map; affine along ``axis``."""
    axis = _check_axis(axis, x.ndim)
    E = x.shape[axis]
    if gain.shape != (E,) or bias.shape != (E,):
        raise ShapeError(
            f"global_layer_norm: gain {gain.shape} / bias {bias.shape} do not match "
            f"extent {E} of axis {axis} in {x.shape}"
        )
    bshape = [1] * x.ndim
    bshape[axis] = E
    gb = gain.data.reshape(bshape)

    stats = _active_stats.get()
    frozen = stats is not None and stats.replay
    n = x.size
    if frozen:
        mu, var = stats.entries[stats.cursor]
        stats.cursor += 1
        xc = x.data - mu
    else:
        mu = float(x.data.mean())
        xc = x.data - mu
        flat = xc.reshape(-1)
        var = float(np.dot(flat, flat)) / n
        if stats is not None:
            stats.entries.append((mu, var))
    inv = 1.0 / np.sqrt(var + LAYER_NORM_EPS)
    y = xc
    y *= inv
    out = y * gb
    out += bias.data.reshape(bshape)

    def backward(g):
        ym = np.moveaxis(y, axis, -1).reshape(-1, E)
        gm = np.moveaxis(g, axis, -1).reshape(-1, E)
        g_gain = np.einsum("ij,ij->j", gm, ym)
        g_bias = gm.sum(axis=0)
        dy = g * gb
        if frozen:
            gx = dy * inv
        else:
            mean_dy = dy.mean()
            mean_dyy = float(np.dot(dy.reshape(-1), y.reshape(-1))) / n
            gx = y * -mean_dyy
            gx += dy
            gx -= mean_dy
            gx *= inv
        return gx, g_gain, g_bias

    return Tensor._from_op(out, (x, gain, bias), backward)

"""Temporal convolutional networks used for mask estimation.

Four flavours share the same residual/skip plumbing:

* :class:`Conv1DBlock` stacks over an ``(L, N)`` map (SC, MC, 2-D variants),
* :class:`TCN3D`, one independent 1-D TCN per channel slice of ``(L, N, C)``,
* :class:`IC2DBlock` stacks that mix channels with 1x1 convs and convolve
  (time, feature) depthwise,
* :class:`ScheduledTCN`, IC stacks whose (N, C) change from stack to stack.
"""
from __future__ import annotations

import math
from typing import NamedTuple, Sequence

import numpy as np

from .errors import ConfigError, ShapeError
from .layers import DepthwiseConv1d, DepthwiseConv2d, LayerNorm, Module, Pointwise, PReLU
from .tensor import Tensor, stack, take

FEATURE_AXIS = 1
CHANNEL_AXIS = 2


class BlockOutput(NamedTuple):
    residual: Tensor
    skip: Tensor


def dilation_schedule(D: int) -> list[int]:
    if D < 1:
        raise ConfigError(f"a stack needs at least one block, got D={D}")
    return [2 ** i for i in range(D)]


class Conv1DBlock(Module):
    """1x1 (N->H), PReLU, norm, dilated depthwise conv, PReLU, norm, then skip/residual 1x1s."""

    def __init__(self, rng: np.random.Generator, N: int, H: int, dilation: int):
        self.dilation = dilation
        self.conv_in = Pointwise(rng, N, H, FEATURE_AXIS)
        self.prelu_in = PReLU()
        self.norm_in = LayerNorm(H, FEATURE_AXIS)
        self.dconv = DepthwiseConv1d(rng, H, dilation)
        self.prelu_d = PReLU()
        self.norm_d = LayerNorm(H, FEATURE_AXIS)
        self.skip_conv = Pointwise(rng, H, N, FEATURE_AXIS)
        self.res_conv = Pointwise(rng, H, N, FEATURE_AXIS)

    def __call__(self, x: Tensor) -> BlockOutput:
        if x.ndim != 2 or x.shape[1] != self.conv_in.n_in:
            raise ShapeError(f"Conv1DBlock expects (L, {self.conv_in.n_in}), got {x.shape}")
        h = self.norm_in(self.prelu_in(self.conv_in(x)))
        h = self.norm_d(self.prelu_d(self.dconv(h)))
        return BlockOutput(x + self.res_conv(h), self.skip_conv(h))


class IC2DBlock(Module):
    """Inter-channel block: every 1x1 conv acts on the channel axis only.

    Feature and time extents are never changed inside the block.
    """

    def __init__(self, rng: np.random.Generator, C: int, H: int, dilation: int):
        self.dilation = dilation
        self.conv_in = Pointwise(rng, C, H, CHANNEL_AXIS)
        self.prelu_in = PReLU()
        self.norm_in = LayerNorm(H, CHANNEL_AXIS)
        self.dconv = DepthwiseConv2d(rng, H, dilation)
        self.prelu_d = PReLU()
        self.norm_d = LayerNorm(H, CHANNEL_AXIS)
        self.skip_conv = Pointwise(rng, H, C, CHANNEL_AXIS)
        self.res_conv = Pointwise(rng, H, C, CHANNEL_AXIS)

    def __call__(self, x: Tensor) -> BlockOutput:
        if x.ndim != 3 or x.shape[2] != self.conv_in.n_in:
            raise ShapeError(f"IC2DBlock expects (L, N, {self.conv_in.n_in}), got {x.shape}")
        h = self.norm_in(self.prelu_in(self.conv_in(x)))
        h = self.norm_d(self.prelu_d(self.dconv(h)))
        return BlockOutput(x + self.res_conv(h), self.skip_conv(h))


class Stack(Module):
    """``D`` blocks chained on the residual path with dilations 1, 2, 4, ..."""

    def __init__(self, rng: np.random.Generator, D: int, kind: str, width: int, hidden: int):
        if kind == "1d":
            make = Conv1DBlock
        elif kind == "ic":
            make = IC2DBlock
        else:
            raise ConfigError(f"unknown block kind {kind!r}")
        self.blocks = [make(rng, width, hidden, d) for d in dilation_schedule(D)]

    def __call__(self, x: Tensor) -> tuple[Tensor, Tensor]:
        skip_sum = None
        for block in self.blocks:
            x, skip = block(x)
            skip_sum = skip if skip_sum is None else skip_sum + skip
        return x, skip_sum

    def zero_residual_branches(self) -> None:
        for block in self.blocks:
            block.res_conv.set_zero()


class TCN(Module):
    """``S`` stacks; the skip sums of all stacks are added together."""

    def __init__(self, rng: np.random.Generator, S: int, D: int, kind: str, width: int, hidden: int):
        if S < 1:
            raise ConfigError(f"need at least one stack, got S={S}")
        self.stacks = [Stack(rng, D, kind, width, hidden) for _ in range(S)]

    def __call__(self, x: Tensor) -> Tensor:
        total = None
        for st in self.stacks:
            x, skip = st(x)
            total = skip if total is None else total + skip
        return total

    @property
    def num_blocks(self) -> int:
        return sum(len(st.blocks) for st in self.stacks)


class TCN3D(Module):
    """Independent 1-D TCNs, one per channel slice; no cross-channel mixing."""

    def __init__(self, rng: np.random.Generator, C: int, S: int, D: int, N: int, H: int):
        self.slices = [TCN(rng, S, D, "1d", N, H) for _ in range(C)]

    def __call__(self, x: Tensor) -> Tensor:
        if x.ndim != 3 or x.shape[2] != len(self.slices):
            raise ShapeError(f"TCN3D expects (L, N, {len(self.slices)}), got {x.shape}")
        outs = [tcn(take(x, CHANNEL_AXIS, c)) for c, tcn in enumerate(self.slices)]
        return stack(outs, axis=CHANNEL_AXIS)

    @property
    def num_blocks(self) -> int:
        return sum(t.num_blocks for t in self.slices)


def scaled_features(N: int, s: int) -> int:
    """``floor(N / sqrt(2)**s)`` computed in exact integer arithmetic."""
    return math.isqrt(N * N // (2 ** s))


def downsized_schedule(N: int, C: int, S: int = 3) -> list[tuple[int, int]]:
    """Stack s (0-based) runs at ``(floor(N / 2**(s/2)), C / 2**s)``."""
    sched = []
    for s in range(S):
        if C % (2 ** s):
            raise ConfigError(f"C={C} cannot be halved {s} times")
        sched.append((scaled_features(N, s), C // 2 ** s))
    return sched


def upsized_schedule(N: int, C: int, S: int = 3) -> list[tuple[int, int]]:
    return downsized_schedule(N, C, S)[::-1]


class ScheduledTCN(Module):
    """IC stacks with per-stack ``(N_s, C_s)``.

    Between stacks the residual passes through a feature 1x1 (N_s -> N_s+1)
    and then a channel 1x1 (C_s -> C_s+1). Each stack's summed skip is
    brought to the ``(N_out, C_out)`` of the largest stack by a feature and
    a channel 1x1 before the cross-stack sum. Converters whose input and
    output sizes agree are omitted.
    """

    def __init__(self, rng: np.random.Generator, schedule: Sequence[tuple[int, int]], D: int,
                 hidden_ratio: int = 4):
        schedule = [tuple(int(v) for v in dims) for dims in schedule]
        if not schedule:
            raise ConfigError("empty stack schedule")
        for n, c in schedule:
            if n < 1 or c < 1:
                raise ConfigError(f"schedule dims must be positive, got {(n, c)}")
        if hidden_ratio < 1:
            raise ConfigError(f"hidden_ratio must be >= 1, got {hidden_ratio}")
        self.schedule = schedule
        self.n_out = max(n for n, _ in schedule)
        self.c_out = max(c for _, c in schedule)
        self.stacks = []
        self.transitions = []
        self.skip_resizers = []
        for s, (n, c) in enumerate(schedule):
            self.stacks.append(Stack(rng, D, "ic", c, hidden_ratio * c))
            self.skip_resizers.append(_Resize(rng, (n, c), (self.n_out, self.c_out)))
            if s + 1 < len(schedule):
                self.transitions.append(_Resize(rng, (n, c), schedule[s + 1]))

    @property
    def input_dims(self) -> tuple[int, int]:
        return self.schedule[0]

    def __call__(self, x: Tensor) -> Tensor:
        total = None
        for s, st in enumerate(self.stacks):
            x, skip = st(x)
            skip = self.skip_resizers[s](skip)
            total = skip if total is None else total + skip
            if s < len(self.transitions):
                x = self.transitions[s](x)
        return total

    @property
    def num_blocks(self) -> int:
        return sum(len(st.blocks) for st in self.stacks)


class _Resize(Module):
    def __init__(self, rng, src: tuple[int, int], dst: tuple[int, int]):
        self.feature = Pointwise(rng, src[0], dst[0], FEATURE_AXIS) if src[0] != dst[0] else None
        self.channel = Pointwise(rng, src[1], dst[1], CHANNEL_AXIS) if src[1] != dst[1] else None

    def __call__(self, x: Tensor) -> Tensor:
        if self.feature is not None:
            x = self.feature(x)
        if self.channel is not None:
            x = self.channel(x)
        return x

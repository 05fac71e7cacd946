"""Parameter-owning wrappers around the primitives in :mod:`ictasnet.ops`."""
from __future__ import annotations

from typing import Iterator

import numpy as np

from . import ops
from .tensor import Tensor


def uniform_init(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> Tensor:
    bound = 1.0 / np.sqrt(fan_in)
    return Tensor(rng.uniform(-bound, bound, size=shape), requires_grad=True)


class Module:
    """Base class; parameters are discovered from instance attributes.

    Attributes are visited in assignment order, so parameter names are stable
    for a given construction sequence.
    """

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        for key, value in vars(self).items():
            name = f"{prefix}{key}"
            if isinstance(value, Tensor):
                if value.requires_grad:
                    yield name, value
            elif isinstance(value, Module):
                yield from value.named_parameters(name + ".")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{name}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None


class Pointwise(Module):
    """1x1 convolution ``n_in -> n_out`` along a fixed axis."""

    def __init__(self, rng: np.random.Generator, n_in: int, n_out: int, axis: int, bias: bool = True):
        self.axis = axis
        self.weight = uniform_init(rng, (n_in, n_out), n_in)
        self.bias = uniform_init(rng, (n_out,), n_in) if bias else None

    @property
    def n_in(self) -> int:
        return self.weight.shape[0]

    @property
    def n_out(self) -> int:
        return self.weight.shape[1]

    def __call__(self, x: Tensor) -> Tensor:
        return ops.pointwise_conv(x, self.axis, self.weight, self.bias)

    def set_identity(self) -> None:
        if self.n_in != self.n_out:
            raise ValueError("identity needs a square weight")
        self.weight.data[...] = np.eye(self.n_in)
        if self.bias is not None:
            self.bias.data[...] = 0.0

    def set_zero(self) -> None:
        self.weight.data[...] = 0.0
        if self.bias is not None:
            self.bias.data[...] = 0.0


class DepthwiseConv1d(Module):
    def __init__(self, rng: np.random.Generator, channels: int, dilation: int):
        self.dilation = dilation
        self.kernel = uniform_init(rng, (channels, 3), 3)
        self.bias = uniform_init(rng, (channels,), 3)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.dilated_depthwise_conv1d(x, self.kernel, self.bias, self.dilation)


class DepthwiseConv2d(Module):
    def __init__(self, rng: np.random.Generator, channels: int, dilation: int):
        self.dilation = dilation
        self.kernel = uniform_init(rng, (channels, 3, 3), 9)
        self.bias = uniform_init(rng, (channels,), 9)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.dilated_depthwise_conv2d(x, self.kernel, self.bias, self.dilation)


class PReLU(Module):
    def __init__(self, init: float = 0.25):
        self.slope = Tensor(np.full((1,), init), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.prelu(x, self.slope)


class LayerNorm(Module):
    """Global layer norm with gain/bias of size ``extent`` along ``axis``."""

    def __init__(self, extent: int, axis: int):
        self.axis = axis
        self.gain = Tensor(np.ones(extent), requires_grad=True)
        self.bias = Tensor(np.zeros(extent), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return ops.global_layer_norm(x, self.gain, self.bias, self.axis)

"""Dense float64 tensors with reverse-mode differentiation.

A :class:`Tensor` wraps a C-contiguous ``numpy.ndarray`` (row-major, so the
array's buffer is the flat value buffer). Tensors produced by an operation
keep references to their operands and a closure that maps the output
gradient to operand gradients; :meth:`Tensor.backward` walks that graph in
reverse topological order.
"""
from __future__ import annotations

from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ShapeError

BackwardFn = Callable[[np.ndarray], Sequence["np.ndarray | None"]]


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward", "name")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        arr = np.ascontiguousarray(np.asarray(data, dtype=np.float64))
        if arr.ndim == 0:
            arr = arr.reshape(())
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward: BackwardFn | None = None
        self.name = name

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: Iterable["Tensor"], backward: BackwardFn) -> "Tensor":
        parents = tuple(parents)
        out = cls(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.shape}{flag})"

    # ------------------------------------------------------------------ graph
    def backward(self) -> None:
        """Accumulate d(self)/d(leaf) into ``.grad`` of every trainable leaf.

        Intermediate gradients live only for the duration of the call, so
        calling twice without resetting doubles the leaf gradients.
        """
        if self.data.size != 1:
            raise ShapeError(f"backward() needs a scalar loss, got shape {self.shape}")
        order = _topological_order(self)
        grads: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            g = grads.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                if node.requires_grad:
                    node.grad = g.copy() if node.grad is None else node.grad + g
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

    # ------------------------------------------------------------ arithmetic
    def __add__(self, other) -> "Tensor":
        return add(self, _wrap(other))

    __radd__ = __add__

    def __sub__(self, other) -> "Tensor":
        return add(self, neg(_wrap(other)))

    def __rsub__(self, other) -> "Tensor":
        return add(_wrap(other), neg(self))

    def __mul__(self, other) -> "Tensor":
        return mul(self, _wrap(other))

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return neg(self)

    def sum(self, axis: int | None = None) -> "Tensor":
        return tensor_sum(self, axis)

    def mean(self) -> "Tensor":
        return tensor_sum(self) * (1.0 / self.size)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes) -> "Tensor":
        if len(axes) == 1 and isinstance(axes[0], (tuple, list)):
            axes = tuple(axes[0])
        return transpose(self, axes)


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _topological_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
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
            if id(p) not in seen and p.requires_grad:
                stack.append((p, False))
    return order


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, extent in enumerate(shape):
        if extent == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


# Elementwise arithmetic. Broadcasting is limited to numpy's rules and is
# only relied on for scalars and bias-like operands.
def add(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Tensor._from_op(a.data + b.data, (a, b), backward)


def mul(a: Tensor, b: Tensor) -> Tensor:
    def backward(g):
        return _unbroadcast(g * b.data, a.shape), _unbroadcast(g * a.data, b.shape)

    return Tensor._from_op(a.data * b.data, (a, b), backward)


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,))


def tensor_sum(a: Tensor, axis: int | None = None) -> Tensor:
    if axis is None:
        def backward(g):
            return (np.broadcast_to(g, a.shape).copy(),)

        return Tensor._from_op(np.asarray(a.data.sum()), (a,), backward)

    axis = _check_axis(axis, a.ndim)

    def backward_axis(g):
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return Tensor._from_op(a.data.sum(axis=axis), (a,), backward_axis)


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    try:
        out = a.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"cannot reshape {a.shape} to {shape}") from exc
    return Tensor._from_op(out.copy(), (a,), lambda g: (g.reshape(a.shape),))


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    out = np.ascontiguousarray(a.data.transpose(axes))
    return Tensor._from_op(out, (a,), lambda g: (np.ascontiguousarray(g.transpose(inverse)),))


def take(a: Tensor, axis: int, index: int) -> Tensor:
    """Select one slice along ``axis`` (the axis is removed)."""
    axis = _check_axis(axis, a.ndim)
    if not -a.shape[axis] <= index < a.shape[axis]:
        raise ShapeError(f"index {index} out of range for axis {axis} of shape {a.shape}")
    out = np.ascontiguousarray(np.take(a.data, index, axis=axis))

    def backward(g):
        full = np.zeros_like(a.data)
        sl = [slice(None)] * a.ndim
        sl[axis] = index
        full[tuple(sl)] = g
        return (full,)

    return Tensor._from_op(out, (a,), backward)


def stack(tensors: Sequence[Tensor], axis: int) -> Tensor:
    tensors = list(tensors)
    shapes = {t.shape for t in tensors}
    if len(shapes) != 1:
        raise ShapeError(f"stack needs equal shapes, got {sorted(shapes)}")
    out = np.stack([t.data for t in tensors], axis=axis)
    axis = axis % out.ndim

    def backward(g):
        return tuple(np.ascontiguousarray(np.take(g, i, axis=axis)) for i in range(len(tensors)))

    return Tensor._from_op(out, tensors, backward)


def _check_axis(axis: int, ndim: int) -> int:
    if not -ndim <= axis < ndim:
        raise ShapeError(f"axis {axis} out of range for a rank-{ndim} tensor")
    return axis % ndim


def narrow(a: Tensor, axis: int, start: int, length: int) -> Tensor:
    """Contiguous sub-range ``[start, start + length)`` along ``axis``."""
    axis = _check_axis(axis, a.ndim)
    if start < 0 or length < 0 or start + length > a.shape[axis]:
        raise ShapeError(f"narrow [{start}, {start + length}) exceeds extent {a.shape[axis]} of axis {axis}")
    sl = [slice(None)] * a.ndim
    sl[axis] = slice(start, start + length)
    sl = tuple(sl)

    def backward(g):
        full = np.zeros_like(a.data)
        full[sl] = g
        return (full,)

    return Tensor._from_op(np.ascontiguousarray(a.data[sl]), (a,), backward)

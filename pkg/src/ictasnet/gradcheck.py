"""Central finite-difference verification of analytic gradients."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .tensor import Tensor


def numerical_gradient(f: Callable[[Tensor], Tensor], x0: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    x = np.array(x0, dtype=np.float64)
    grad = np.empty_like(x)
    flat = x.reshape(-1)
    gflat = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        hi = f(Tensor(x)).item()
        flat[i] = orig - eps
        lo = f(Tensor(x)).item()
        flat[i] = orig
        gflat[i] = (hi - lo) / (2.0 * eps)
    return grad


def analytic_gradient(f: Callable[[Tensor], Tensor], x0: np.ndarray) -> np.ndarray:
    x = Tensor(np.array(x0, dtype=np.float64), requires_grad=True)
    f(x).backward()
    return np.zeros_like(x.data) if x.grad is None else x.grad


def grad_check(f: Callable[[Tensor], Tensor], x0, eps: float = 1e-5) -> float:
    """Max elementwise relative error between backprop and central differences.

    The relative error of one element is
    ``|analytic - numeric| / max(|analytic|, |numeric|, 1e-12)``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x0 = x0.data if isinstance(x0, Tensor) else np.asarray(x0, dtype=np.float64)
    return max_relative_error(analytic_gradient(f, x0), numerical_gradient(f, x0, eps))


def max_relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), 1e-12)
    return float(np.max(np.abs(analytic - numeric) / denom))

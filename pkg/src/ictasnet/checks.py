"""Registry of finite-difference gradient checks run by ``ictasnet gradcheck``.

Primitives must agree with central differences to 1e-6 (relative), composite
blocks to 1e-5. Every check uses fixed seeds and toy sizes.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import ops
from .config import ModelConfig
from .frontend import FrameSpec, apply_mask, decode, encode, overlap_add
from .gradcheck import grad_check, max_relative_error, numerical_gradient
from .models import MaskHeadA, MaskHeadB, build_model
from .tcn import TCN, TCN3D, Conv1DBlock, IC2DBlock, ScheduledTCN
from .tensor import Tensor, take
from .training import sdr_loss

PRIMITIVE_TOL = 1e-6
COMPOSITE_TOL = 1e-5


@dataclass
class GradCheck:
    name: str
    tolerance: float
    run: Callable[[], float]


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _weighted(out: Tensor, weights: np.ndarray) -> Tensor:
    return (out * Tensor(weights)).sum()


def _away_from_zero(rng, shape, low=0.1):
    return rng.choice([-1.0, 1.0], size=shape) * rng.uniform(low, 1.0, size=shape)


def parameter_grad_check(param: Tensor, loss: Callable[[], Tensor], eps: float = 1e-5) -> float:
    """Gradient check for a parameter already wired into a module."""
    saved_grad = param.grad
    param.grad = None
    loss().backward()
    analytic = np.zeros_like(param.data) if param.grad is None else param.grad
    param.grad = saved_grad
    original = param.data

    def f(t: Tensor) -> Tensor:
        param.data = t.data
        try:
            return loss()
        finally:
            param.data = original

    return max_relative_error(analytic, numerical_gradient(f, original, eps))


def _max(*errors: float) -> float:
    return max(errors)


# ------------------------------------------------------------------ primitives
def check_matmul() -> float:
    rng = _rng(1)
    A, B, W = rng.standard_normal((5, 7)), rng.standard_normal((7, 3)), rng.standard_normal((5, 3))
    return _max(
        grad_check(lambda a: _weighted(ops.matmul(a, Tensor(B)), W), A),
        grad_check(lambda b: _weighted(ops.matmul(Tensor(A), b), W), B),
    )


def check_pointwise_conv() -> float:
    rng = _rng(2)
    errs = []
    for shape, axis, n_out in [((4, 3, 5), 2, 6), ((6, 4), 1, 3), ((3, 5, 2), 1, 4)]:
        x = rng.standard_normal(shape)
        w = rng.standard_normal((shape[axis], n_out))
        b = rng.standard_normal(n_out)
        out_shape = list(shape)
        out_shape[axis] = n_out
        R = rng.standard_normal(out_shape)
        errs.append(grad_check(lambda t: _weighted(ops.pointwise_conv(t, axis, Tensor(w), Tensor(b)), R), x))
        errs.append(grad_check(lambda t: _weighted(ops.pointwise_conv(Tensor(x), axis, t, Tensor(b)), R), w))
        errs.append(grad_check(lambda t: _weighted(ops.pointwise_conv(Tensor(x), axis, Tensor(w), t), R), b))
    return max(errs)


def check_depthwise_conv2d() -> float:
    rng = _rng(3)
    errs = []
    for shape, d in [((6, 6, 2), 1), ((7, 5, 3), 2), ((9, 4, 1), 3)]:
        x = rng.standard_normal(shape)
        k = rng.standard_normal((shape[2], 3, 3))
        b = rng.standard_normal(shape[2])
        R = rng.standard_normal(shape)
        errs.append(grad_check(lambda t: _weighted(ops.dilated_depthwise_conv2d(t, Tensor(k), Tensor(b), d), R), x))
        errs.append(grad_check(lambda t: _weighted(ops.dilated_depthwise_conv2d(Tensor(x), t, Tensor(b), d), R), k))
        errs.append(grad_check(lambda t: _weighted(ops.dilated_depthwise_conv2d(Tensor(x), Tensor(k), t, d), R), b))
    return max(errs)


def check_depthwise_conv1d() -> float:
    rng = _rng(4)
    errs = []
    for shape, d in [((8, 3), 1), ((9, 2), 2), ((12, 4), 4)]:
        x = rng.standard_normal(shape)
        k = rng.standard_normal((shape[1], 3))
        b = rng.standard_normal(shape[1])
        R = rng.standard_normal(shape)
        errs.append(grad_check(lambda t: _weighted(ops.dilated_depthwise_conv1d(t, Tensor(k), Tensor(b), d), R), x))
        errs.append(grad_check(lambda t: _weighted(ops.dilated_depthwise_conv1d(Tensor(x), t, Tensor(b), d), R), k))
        errs.append(grad_check(lambda t: _weighted(ops.dilated_depthwise_conv1d(Tensor(x), Tensor(k), t, d), R), b))
    return max(errs)


def check_relu() -> float:
    rng = _rng(5)
    errs = []
    for shape in [(7,), (3, 4), (2, 3, 4)]:
        x, R = _away_from_zero(rng, shape), rng.standard_normal(shape)
        errs.append(grad_check(lambda t: _weighted(ops.relu(t), R), x))
    return max(errs)


def check_prelu() -> float:
    rng = _rng(6)
    errs = []
    for shape in [(7,), (3, 4), (2, 3, 4)]:
        x, R = _away_from_zero(rng, shape), rng.standard_normal(shape)
        slope = np.array([0.25])
        errs.append(grad_check(lambda t: _weighted(ops.prelu(t, Tensor(slope)), R), x))
        errs.append(grad_check(lambda t: _weighted(ops.prelu(Tensor(x), t), R), slope))
    return max(errs)


def check_sigmoid() -> float:
    rng = _rng(7)
    errs = []
    for shape in [(7,), (3, 4), (2, 3, 4)]:
        x = 3.0 * rng.standard_normal(shape)
        errs.append(grad_check(lambda t: ops.sigmoid(t).sum(), x))
    return max(errs)


def check_layer_norm() -> float:
    rng = _rng(8)
    errs = []
    for shape, axis in [((5, 4, 3), 2), ((6, 5), 1), ((4, 3, 2), 1)]:
        x = rng.standard_normal(shape)
        E = shape[axis]
        gain, bias = rng.uniform(0.5, 1.5, E), rng.standard_normal(E)
        R = rng.standard_normal(shape)
        errs.append(grad_check(lambda t: _weighted(ops.global_layer_norm(t, Tensor(gain), Tensor(bias), axis), R), x))
        errs.append(grad_check(lambda t: _weighted(ops.global_layer_norm(Tensor(x), t, Tensor(bias), axis), R), gain))
        errs.append(grad_check(lambda t: _weighted(ops.global_layer_norm(Tensor(x), Tensor(gain), t, axis), R), bias))
    return max(errs)


def check_overlap_add() -> float:
    rng = _rng(9)
    errs = []
    for L, K, hop in [(3, 8, 4), (4, 6, 2), (2, 5, 5)]:
        spec = FrameSpec(K, hop)
        seg = rng.standard_normal((L, K))
        R = rng.standard_normal((L - 1) * hop + K)
        errs.append(grad_check(lambda t: _weighted(overlap_add(t, spec), R), seg))
    return max(errs)


def check_sdr_loss() -> float:
    rng = _rng(10)
    errs = []
    for T in (16, 50, 200):
        s = rng.standard_normal(T)
        s_hat = s + 0.5 * rng.standard_normal(T)
        errs.append(grad_check(lambda t: sdr_loss(s, t), s_hat))
    return max(errs)


# ------------------------------------------------------------------ composites
def check_frontend() -> float:
    """decode(apply_mask(encode(x)_ref, m)) followed by overlap-add."""
    rng = _rng(11)
    L, K, F, M = 5, 8, 6, 2
    spec = FrameSpec(K, K // 2)
    seg = rng.standard_normal((L, K, M))
    U, V = rng.standard_normal((K, F)), rng.standard_normal((F, K))
    m = rng.uniform(0.1, 0.9, (L, F))
    R = rng.standard_normal((L - 1) * spec.hop + K)

    def pipeline(seg_t, U_t, V_t):
        w = encode(seg_t, U_t)
        return _weighted(overlap_add(decode(apply_mask(take(w, 2, 0), Tensor(m)), V_t), spec), R)

    return _max(
        grad_check(lambda t: pipeline(t, Tensor(U), Tensor(V)), seg),
        grad_check(lambda t: pipeline(Tensor(seg), t, Tensor(V)), U),
        grad_check(lambda t: pipeline(Tensor(seg), Tensor(U), t), V),
    )


def _module_checks(module, forward: Callable[[Tensor], Tensor], x0: np.ndarray) -> float:
    errs = [grad_check(forward, x0)]
    x = Tensor(x0)
    for _, p in module.named_parameters():
        errs.append(parameter_grad_check(p, lambda: forward(x)))
    return max(errs)


def check_conv1d_block() -> float:
    rng = _rng(12)
    block = Conv1DBlock(rng, N=3, H=4, dilation=2)
    x0 = rng.standard_normal((7, 3))
    R1, R2 = rng.standard_normal((7, 3)), rng.standard_normal((7, 3))

    def f(t):
        out = block(t)
        return _weighted(out.residual, R1) + _weighted(out.skip, R2)

    return _module_checks(block, f, x0)


def check_ic_block() -> float:
    rng = _rng(13)
    block = IC2DBlock(rng, C=4, H=8, dilation=1)
    x0 = rng.standard_normal((8, 6, 4))
    R1, R2 = rng.standard_normal((8, 6, 4)), rng.standard_normal((8, 6, 4))

    def f(t):
        out = block(t)
        return _weighted(out.residual, R1) + _weighted(out.skip, R2)

    return _module_checks(block, f, x0)


def check_tcn() -> float:
    rng = _rng(14)
    tcn = TCN(rng, S=2, D=2, kind="1d", width=3, hidden=4)
    x0 = rng.standard_normal((9, 3))
    R = rng.standard_normal((9, 3))
    return _module_checks(tcn, lambda t: _weighted(tcn(t), R), x0)


def check_tcn3d() -> float:
    rng = _rng(15)
    tcn = TCN3D(rng, C=2, S=1, D=2, N=3, H=4)
    x0 = rng.standard_normal((7, 3, 2))
    R = rng.standard_normal((7, 3, 2))
    return _module_checks(tcn, lambda t: _weighted(tcn(t), R), x0)


def check_downsized_stack() -> float:
    rng = _rng(16)
    tcn = ScheduledTCN(rng, [(6, 4), (4, 2), (3, 1)], D=2)
    x0 = rng.standard_normal((6, 6, 4))
    R = rng.standard_normal((6, 6, 4))
    return _module_checks(tcn, lambda t: _weighted(tcn(t), R), x0)


def check_mask_head_a() -> float:
    rng = _rng(17)
    head = MaskHeadA(rng, N=4, F=5)
    x0 = rng.standard_normal((6, 4))
    R = rng.standard_normal((6, 5))
    return _module_checks(head, lambda t: _weighted(head(t), R), x0)


def check_mask_head_b() -> float:
    rng = _rng(18)
    head = MaskHeadB(rng, N=4, C=3, F=5)
    x0 = rng.standard_normal((6, 4, 3))
    R = rng.standard_normal((6, 5))
    return _module_checks(head, lambda t: _weighted(head(t), R), x0)


def check_model_sdr() -> float:
    """Toy 2-channel IC model end to end through the SDR loss (selected parameters)."""
    cfg = ModelConfig(variant="IC", D=2, S=1, F=6, N=4, C=2, H=8, K=8, M=2, reference_channel=1, seed=3)
    model = build_model(cfg)
    rng = _rng(19)
    noisy = rng.standard_normal((20, 2)) * 0.5
    clean = noisy[:, 0] + 0.3 * rng.standard_normal(20)
    params = dict(model.named_parameters())
    errs = []
    for name in ("encoder.U", "bottleneck.channel.weight", "tcn.stacks.0.blocks.1.dconv.kernel",
                 "head.feature.bias", "decoder.V"):
        errs.append(parameter_grad_check(params[name], lambda: sdr_loss(clean, model.forward(noisy))))
    return max(errs)


REGISTRY: dict[str, GradCheck] = {
    c.name: c
    for c in [
        GradCheck("matmul", PRIMITIVE_TOL, check_matmul),
        GradCheck("pointwise_conv", PRIMITIVE_TOL, check_pointwise_conv),
        GradCheck("dilated_depthwise_conv2d", PRIMITIVE_TOL, check_depthwise_conv2d),
        GradCheck("dilated_depthwise_conv1d", PRIMITIVE_TOL, check_depthwise_conv1d),
        GradCheck("relu", PRIMITIVE_TOL, check_relu),
        GradCheck("prelu", PRIMITIVE_TOL, check_prelu),
        GradCheck("sigmoid", PRIMITIVE_TOL, check_sigmoid),
        GradCheck("global_layer_norm", PRIMITIVE_TOL, check_layer_norm),
        GradCheck("overlap_add", PRIMITIVE_TOL, check_overlap_add),
        GradCheck("sdr_loss", PRIMITIVE_TOL, check_sdr_loss),
        GradCheck("frontend", COMPOSITE_TOL, check_frontend),
        GradCheck("conv1d_block", COMPOSITE_TOL, check_conv1d_block),
        GradCheck("conv2d_block_ic", COMPOSITE_TOL, check_ic_block),
        GradCheck("tcn", COMPOSITE_TOL, check_tcn),
        GradCheck("tcn3d", COMPOSITE_TOL, check_tcn3d),
        GradCheck("downsized_stack", COMPOSITE_TOL, check_downsized_stack),
        GradCheck("mask_head_a", COMPOSITE_TOL, check_mask_head_a),
        GradCheck("mask_head_b", COMPOSITE_TOL, check_mask_head_b),
        GradCheck("model_sdr", COMPOSITE_TOL, check_model_sdr),
    ]
}


def run_checks(names=None) -> list[tuple[str, float, float, bool]]:
    """Run the named checks (all by default); returns (name, error, tolerance, passed)."""
    selected = list(REGISTRY) if names is None else list(names)
    results = []
    for name in selected:
        check = REGISTRY[name]
        err = check.run()
        results.append((name, err, check.tolerance, err < check.tolerance))
    return results

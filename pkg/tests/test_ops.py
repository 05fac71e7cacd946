import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ictasnet.errors import ShapeError
from ictasnet.gradcheck import grad_check
from ictasnet.ops import (
    depthwise_conv2d_reference, dilated_depthwise_conv1d, dilated_depthwise_conv2d,
    global_layer_norm, matmul, pointwise_conv, prelu, record_norm_statistics, relu,
    replay_norm_statistics, sigmoid,
)
from ictasnet.tensor import Tensor

SHAPES_2D = [(3, 2), (5, 4), (2, 7)]
SHAPES_3D = [(4, 3, 2), (6, 5, 3), (3, 8, 1)]
dims = st.integers(1, 6)


def direct_dconv2d(x, k, b, d):
    # brute-force sum over the zero-padded neighbourhood
    L, N, C = x.shape
    out = np.empty_like(x)
    for t in range(L):
        for f in range(N):
            for c in range(C):
                acc = b[c]
                for i in range(3):
                    for j in range(3):
                        tt, ff = t + (i - 1) * d, f + (j - 1) * d
                        if 0 <= tt < L and 0 <= ff < N:
                            acc += k[c, i, j] * x[tt, ff, c]
                out[t, f, c] = acc
    return out


# ------------------------------------------------------------ pointwise
def test_pointwise_identity_is_bit_exact(rng):
    x = rng.standard_normal((4, 3, 5))
    out = pointwise_conv(Tensor(x), 2, Tensor(np.eye(5)), Tensor(np.zeros(5)))
    assert np.array_equal(out.data, x)


def test_pointwise_channel_axis_shape(rng):
    out = pointwise_conv(Tensor(rng.standard_normal((4, 2, 3))), 2, Tensor(rng.standard_normal((3, 5))))
    assert out.shape == (4, 2, 5)


def test_pointwise_feature_axis_bottleneck(rng):
    L, F, M, N = 6, 4, 3, 5
    x = rng.standard_normal((L, F * M))
    W, b = rng.standard_normal((F * M, N)), rng.standard_normal(N)
    out = pointwise_conv(Tensor(x), 1, Tensor(W), Tensor(b))
    assert out.shape == (L, N)
    assert np.allclose(out.data, x @ W + b, rtol=0, atol=1e-12)


def test_pointwise_rejects_bad_weight(rng):
    with pytest.raises(ShapeError):
        pointwise_conv(Tensor(np.ones((4, 3))), 1, Tensor(np.ones((2, 5))))


@given(L=dims, N=dims, C=dims, out=dims, axis=st.sampled_from([0, 1, 2]))
@settings(max_examples=40, deadline=None)
def test_pointwise_shape_rule(L, N, C, out, axis):
    shape = [L, N, C]
    x = Tensor(np.ones(shape))
    y = pointwise_conv(x, axis, Tensor(np.ones((shape[axis], out))), Tensor(np.zeros(out)))
    shape[axis] = out
    assert y.shape == tuple(shape)


@pytest.mark.parametrize("shape", SHAPES_3D)
def test_pointwise_gradients(rng, shape):
    W, b = rng.standard_normal((shape[1], 4)), rng.standard_normal(4)
    R = rng.standard_normal((shape[0], 4, shape[2]))
    f = lambda t: (pointwise_conv(t, 1, Tensor(W), Tensor(b)) * Tensor(R)).sum()
    assert grad_check(f, rng.standard_normal(shape)) < 1e-6
    g = lambda t: (pointwise_conv(Tensor(np.ones(shape)), 1, t, Tensor(b)) * Tensor(R)).sum()
    assert grad_check(g, W) < 1e-6


# ------------------------------------------------------------ depthwise 2-D
def center_kernel(C, taps=(3, 3)):
    k = np.zeros((C,) + taps)
    k[(slice(None),) + tuple(t // 2 for t in taps)] = 1.0
    return k


@pytest.mark.parametrize("d", [1, 2, 5])
def test_dconv2d_identity_kernel_bit_exact(rng, d):
    x = rng.standard_normal((7, 6, 3))
    out = dilated_depthwise_conv2d(Tensor(x), Tensor(center_kernel(3)), Tensor(np.zeros(3)), d)
    assert np.array_equal(out.data, x)


def test_dconv2d_all_ones():
    out = dilated_depthwise_conv2d(Tensor(np.ones((4, 4, 1))), Tensor(np.ones((1, 3, 3))),
                                   Tensor(np.zeros(1)), 1).data[..., 0]
    assert np.array_equal(out, direct_dconv2d(np.ones((4, 4, 1)), np.ones((1, 3, 3)), np.zeros(1), 1)[..., 0])
    assert out[1, 1] == out[2, 2] == 9.0
    assert out[0, 0] == out[0, 3] == out[3, 0] == out[3, 3] == 4.0
    assert out[0, 1] == 6.0


@given(L=dims, N=dims, C=st.integers(1, 3), d=st.integers(1, 4), seed=st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_dconv2d_matches_direct_sum(L, N, C, d, seed):
    r = np.random.default_rng(seed)
    x, k, b = r.standard_normal((L, N, C)), r.standard_normal((C, 3, 3)), r.standard_normal(C)
    fast = dilated_depthwise_conv2d(Tensor(x), Tensor(k), Tensor(b), d).data
    assert np.allclose(fast, direct_dconv2d(x, k, b, d), rtol=0, atol=1e-12)
    assert np.allclose(fast, depthwise_conv2d_reference(x, k, b, d), rtol=0, atol=1e-12)


@pytest.mark.parametrize("shape,d", [((5, 4, 2), 1), ((6, 7, 3), 2), ((9, 3, 1), 3)])
def test_dconv2d_gradients(rng, shape, d):
    C = shape[2]
    x, k, b = rng.standard_normal(shape), rng.standard_normal((C, 3, 3)), rng.standard_normal(C)
    R = Tensor(rng.standard_normal(shape))
    assert grad_check(lambda t: (dilated_depthwise_conv2d(t, Tensor(k), Tensor(b), d) * R).sum(), x) < 1e-6
    assert grad_check(lambda t: (dilated_depthwise_conv2d(Tensor(x), t, Tensor(b), d) * R).sum(), k) < 1e-6
    assert grad_check(lambda t: (dilated_depthwise_conv2d(Tensor(x), Tensor(k), t, d) * R).sum(), b) < 1e-6


def test_dconv2d_errors():
    with pytest.raises(ShapeError):
        dilated_depthwise_conv2d(Tensor(np.ones((3, 3, 2))), Tensor(np.ones((1, 3, 3))), Tensor(np.zeros(1)), 1)
    with pytest.raises(ShapeError):
        dilated_depthwise_conv2d(Tensor(np.ones((3, 3))), Tensor(np.ones((1, 3, 3))), Tensor(np.zeros(1)), 1)
    with pytest.raises(ValueError):
        dilated_depthwise_conv2d(Tensor(np.ones((3, 3, 1))), Tensor(np.ones((1, 3, 3))), Tensor(np.zeros(1)), 0)


# ------------------------------------------------------------ depthwise 1-D
def conv1d(x, k, d):
    out = dilated_depthwise_conv1d(Tensor(np.asarray(x, float)[:, None]), Tensor(np.asarray([k], float)),
                                   Tensor(np.zeros(1)), d)
    return out.data[:, 0].tolist()


def test_dconv1d_examples():
    assert conv1d([1, 2, 3, 4], [1, 1, 1], 1) == [3, 6, 9, 7]
    assert conv1d([1, 2, 3, 4], [1, 1, 1], 2) == [4, 6, 4, 6]
    assert conv1d([1, 2, 3, 4], [0, 1, 0], 3) == [1, 2, 3, 4]


def test_dconv1d_identity_bit_exact(rng):
    x = rng.standard_normal((9, 4))
    out = dilated_depthwise_conv1d(Tensor(x), Tensor(center_kernel(4, (3,))), Tensor(np.zeros(4)), 2)
    assert np.array_equal(out.data, x)


@pytest.mark.parametrize("shape,d", [((5, 2), 1), ((8, 3), 2), ((12, 1), 4)])
def test_dconv1d_gradients(rng, shape, d):
    N = shape[1]
    x, k, b = rng.standard_normal(shape), rng.standard_normal((N, 3)), rng.standard_normal(N)
    R = Tensor(rng.standard_normal(shape))
    assert grad_check(lambda t: (dilated_depthwise_conv1d(t, Tensor(k), Tensor(b), d) * R).sum(), x) < 1e-6
    assert grad_check(lambda t: (dilated_depthwise_conv1d(Tensor(x), t, Tensor(b), d) * R).sum(), k) < 1e-6


def test_dconv1d_errors():
    with pytest.raises(ShapeError):
        dilated_depthwise_conv1d(Tensor(np.ones((4, 2))), Tensor(np.ones((3, 3))), Tensor(np.zeros(3)), 1)


# ------------------------------------------------------------ activations
def test_activation_examples():
    assert relu(Tensor([-1.0, 0.0, 2.0])).data.tolist() == [0.0, 0.0, 2.0]
    assert prelu(Tensor([-2.0, 3.0]), Tensor([0.25])).data.tolist() == [-0.5, 3.0]
    assert sigmoid(Tensor([0.0])).data.tolist() == [0.5]


def test_relu_gradient_at_zero_is_zero():
    x = Tensor([0.0, 1.0], requires_grad=True)
    relu(x).sum().backward()
    assert x.grad.tolist() == [0.0, 1.0]


def test_sigmoid_strictly_inside_unit_interval():
    out = sigmoid(Tensor([-1e6, -50.0, 50.0, 1e6])).data
    assert np.all(out > 0) and np.all(out < 1)


@given(a=st.floats(0.01, 100.0), seed=st.integers(0, 10**6))
@settings(max_examples=50, deadline=None)
def test_positive_homogeneity(a, seed):
    x = np.random.default_rng(seed).standard_normal(12)
    assert np.allclose(relu(Tensor(a * x)).data, a * relu(Tensor(x)).data, rtol=1e-12, atol=0)
    slope = Tensor([0.25])
    assert np.allclose(prelu(Tensor(a * x), slope).data, a * prelu(Tensor(x), slope).data, rtol=1e-12, atol=0)


@pytest.mark.parametrize("shape", SHAPES_2D)
def test_activation_gradients(rng, shape):
    x = rng.standard_normal(shape)
    R = Tensor(rng.standard_normal(shape))
    assert grad_check(lambda t: (relu(t) * R).sum(), x) < 1e-6
    assert grad_check(lambda t: (sigmoid(t) * R).sum(), x) < 1e-6
    assert grad_check(lambda t: (prelu(t, Tensor([0.3])) * R).sum(), x) < 1e-6
    assert grad_check(lambda t: (prelu(Tensor(x), t) * R).sum(), np.array([0.3])) < 1e-6


def test_prelu_rejects_vector_slope():
    with pytest.raises(ShapeError):
        prelu(Tensor([1.0]), Tensor([0.1, 0.2]))


# ------------------------------------------------------------ layer norm
def test_layer_norm_constant_input_gives_zeros():
    out = global_layer_norm(Tensor(np.full((3, 4), 2.5)), Tensor(np.ones(4)), Tensor(np.zeros(4)))
    assert np.array_equal(out.data, np.zeros((3, 4)))


def test_layer_norm_standardizes(rng):
    out = global_layer_norm(Tensor(3 + 5 * rng.standard_normal((6, 5, 4))), Tensor(np.ones(4)),
                            Tensor(np.zeros(4)), axis=2).data
    assert abs(out.mean()) < 1e-12
    assert abs(out.var() - 1) < 1e-6


@pytest.mark.parametrize("shape,axis", [((4, 3), 1), ((5, 3, 2), 2), ((3, 6, 2), 1)])
def test_layer_norm_gradients(rng, shape, axis):
    E = shape[axis]
    x, g, b = rng.standard_normal(shape), rng.standard_normal(E), rng.standard_normal(E)
    R = Tensor(rng.standard_normal(shape))
    assert grad_check(lambda t: (global_layer_norm(t, Tensor(g), Tensor(b), axis) * R).sum(), x) < 1e-6
    assert grad_check(lambda t: (global_layer_norm(Tensor(x), t, Tensor(b), axis) * R).sum(), g) < 1e-6
    assert grad_check(lambda t: (global_layer_norm(Tensor(x), Tensor(g), t, axis) * R).sum(), b) < 1e-6


def test_layer_norm_replay_freezes_statistics(rng):
    x = rng.standard_normal((5, 3))
    gain, bias = Tensor(np.ones(3)), Tensor(np.zeros(3))
    with record_norm_statistics() as stats:
        ref = global_layer_norm(Tensor(x), gain, bias).data
    assert len(stats.entries) == 1
    x2 = x.copy()
    x2[0, 0] += 10.0
    with replay_norm_statistics(stats):
        out = global_layer_norm(Tensor(x2), gain, bias).data
    changed = np.argwhere(out != ref)
    assert changed.tolist() == [[0, 0]]


def test_replay_must_consume_all_statistics(rng):
    with record_norm_statistics() as stats:
        global_layer_norm(Tensor(rng.standard_normal((2, 2))), Tensor(np.ones(2)), Tensor(np.zeros(2)))
    with pytest.raises(RuntimeError):
        with replay_norm_statistics(stats):
            pass


def test_layer_norm_rejects_wrong_affine_size():
    with pytest.raises(ShapeError):
        global_layer_norm(Tensor(np.ones((2, 3))), Tensor(np.ones(2)), Tensor(np.zeros(2)))


# ------------------------------------------------------------ determinism
def test_ops_are_deterministic(rng):
    x, k, b = rng.standard_normal((8, 6, 3)), rng.standard_normal((3, 3, 3)), rng.standard_normal(3)
    runs = [dilated_depthwise_conv2d(Tensor(x), Tensor(k), Tensor(b), 2).data for _ in range(2)]
    assert np.array_equal(runs[0], runs[1])
    ln = [global_layer_norm(Tensor(x), Tensor(b), Tensor(b), 2).data for _ in range(2)]
    assert np.array_equal(ln[0], ln[1])


@given(r=dims, k=dims, c=dims)
@settings(max_examples=30, deadline=None)
def test_matmul_shape_rule(r, k, c):
    assert matmul(Tensor(np.ones((r, k))), Tensor(np.ones((k, c)))).shape == (r, c)

import numpy as np
import pytest

from ictasnet.errors import ShapeError
from ictasnet.gradcheck import grad_check
from ictasnet.ops import matmul, sigmoid, dilated_depthwise_conv2d
from ictasnet.tensor import Tensor, narrow, stack, take


def test_tensor_invariants():
    t = Tensor(np.arange(6.0).reshape(2, 3), requires_grad=True)
    assert t.data.dtype == np.float64
    assert t.data.flags.c_contiguous
    assert np.prod(t.shape) == t.data.size
    (t * t).sum().backward()
    assert t.grad.shape == t.shape


def test_op_records_only_its_operands():
    a = Tensor([1.0, 2.0], requires_grad=True)
    b = Tensor([3.0, 4.0])
    out = a * b
    assert out._parents == (a, b)
    assert (a + 1.0)._parents[0] is a


def test_constant_graph_records_nothing():
    out = Tensor([1.0]) * Tensor([2.0])
    assert out._parents == () and not out.requires_grad


def test_matmul_identity():
    B = np.random.default_rng(0).standard_normal((2, 3))
    assert np.array_equal(matmul(Tensor(np.eye(2)), Tensor(B)).data, B)


def test_matmul_hand_arithmetic():
    out = matmul(Tensor([[1.0, 2.0], [3.0, 4.0]]), Tensor([[1.0], [1.0]]))
    assert out.data.tolist() == [[3.0], [7.0]]


def test_matmul_shape_error_names_both_shapes():
    with pytest.raises(ShapeError, match=r"\(2, 3\).*\(2, 2\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 2))))


def test_matmul_gradient_matches_finite_differences(rng):
    A, B = rng.standard_normal((5, 7)), rng.standard_normal((7, 3))
    assert grad_check(lambda a: matmul(a, Tensor(B)).sum(), A) < 1e-6


def test_backward_sum_gives_ones():
    x = Tensor(np.array([1.5, -2.0, 3.0]), requires_grad=True)
    x.sum().backward()
    assert x.grad.tolist() == [1.0, 1.0, 1.0]


def test_backward_square():
    x = Tensor([1.0, 2.0], requires_grad=True)
    (x * x).sum().backward()
    assert x.grad.tolist() == [2.0, 4.0]


def test_backward_accumulates_across_calls():
    x = Tensor([1.0, 2.0], requires_grad=True)
    loss = (x * x).sum()
    loss.backward()
    loss.backward()
    assert x.grad.tolist() == [4.0, 8.0]


def test_backward_rejects_non_scalar():
    x = Tensor([1.0, 2.0], requires_grad=True)
    with pytest.raises(ShapeError):
        (x * 2.0).backward()


def test_shared_subexpression_gradients_add():
    x = Tensor([3.0], requires_grad=True)
    y = x * x
    (y + y * x).sum().backward()  # d/dx (x^2 + x^3)
    assert x.grad.tolist() == [2 * 3.0 + 3 * 9.0]


def test_grad_check_of_linear_sum_is_exact():
    # dyadic step and integer inputs keep every central difference exact
    x0 = np.array([[1.0, -2.0, 3.0], [0.0, 5.0, -7.0]])
    assert grad_check(lambda t: t.sum(), x0, eps=2.0 ** -16) == 0.0
    assert grad_check(lambda t: t.sum(), np.zeros(5)) == 0.0


def test_grad_check_sum_on_arbitrary_input_is_tiny(rng):
    assert grad_check(lambda t: t.sum(), rng.standard_normal(10)) < 1e-9


def test_grad_check_sigmoid(rng):
    assert grad_check(lambda t: sigmoid(t).sum(), rng.standard_normal((3, 4))) < 1e-6


def test_grad_check_through_depthwise_conv(rng):
    k, b = rng.standard_normal((2, 3, 3)), rng.standard_normal(2)
    R = rng.standard_normal((6, 6, 2))
    f = lambda t: (dilated_depthwise_conv2d(t, Tensor(k), Tensor(b), 1) * Tensor(R)).sum()
    assert grad_check(f, rng.standard_normal((6, 6, 2))) < 1e-6


def test_grad_check_rejects_bad_eps():
    with pytest.raises(ValueError):
        grad_check(lambda t: t.sum(), np.ones(2), eps=0.0)


def test_structural_ops_gradients(rng):
    x0 = rng.standard_normal((4, 3, 2))
    R = rng.standard_normal((4, 3))
    assert grad_check(lambda t: (take(t, 2, 1) * Tensor(R)).sum(), x0) < 1e-8
    assert grad_check(lambda t: (narrow(t, 0, 1, 2) * 3.0).sum(), x0) < 1e-8
    R2 = Tensor(rng.standard_normal((2, 12)))
    assert grad_check(lambda t: (t.transpose(2, 0, 1).reshape(2, 12) * R2).sum(), x0) < 1e-8
    assert grad_check(lambda t: (stack([t, t * 2.0], axis=1) * 1.5).sum(), x0) < 1e-8

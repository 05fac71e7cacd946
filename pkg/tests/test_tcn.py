import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ictasnet.analysis import receptive_field
from ictasnet.errors import ConfigError, ShapeError
from ictasnet.gradcheck import grad_check
from ictasnet.ops import record_norm_statistics, replay_norm_statistics
from ictasnet.tcn import (
    TCN, TCN3D, Conv1DBlock, IC2DBlock, ScheduledTCN, Stack, dilation_schedule,
    downsized_schedule, scaled_features, upsized_schedule,
)
from ictasnet.tensor import Tensor


def test_dilation_schedule():
    assert dilation_schedule(1) == [1]
    assert dilation_schedule(8) == [1, 2, 4, 8, 16, 32, 64, 128]


@given(L=st.integers(1, 12), N=st.integers(1, 6), H=st.integers(1, 8), d=st.integers(1, 8),
       seed=st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_conv1d_block_shapes(L, N, H, d, seed):
    r = np.random.default_rng(seed)
    out = Conv1DBlock(r, N, H, d)(Tensor(r.standard_normal((L, N))))
    assert out.residual.shape == (L, N) and out.skip.shape == (L, N)


@given(L=st.integers(1, 8), N=st.integers(1, 6), C=st.integers(1, 4), H=st.integers(1, 6),
       d=st.integers(1, 4), seed=st.integers(0, 1000))
@settings(max_examples=25, deadline=None)
def test_ic_block_shapes(L, N, C, H, d, seed):
    r = np.random.default_rng(seed)
    out = IC2DBlock(r, C, H, d)(Tensor(r.standard_normal((L, N, C))))
    assert out.residual.shape == (L, N, C) and out.skip.shape == (L, N, C)


@pytest.mark.parametrize("kind,shape", [("1d", (6, 4)), ("ic", (6, 4, 3))])
def test_zeroed_residual_branch_passes_input_through(rng, kind, shape):
    width = shape[-1]
    stack = Stack(rng, 3, kind, width, 5)
    stack.zero_residual_branches()
    x = rng.standard_normal(shape)
    res, _ = stack(Tensor(x))
    assert np.array_equal(res.data, x)


def test_stack_with_one_block_equals_block(rng):
    stack = Stack(rng, 1, "1d", 4, 6)
    x = Tensor(rng.standard_normal((5, 4)))
    res, skip = stack(x)
    out = stack.blocks[0](x)
    assert np.array_equal(res.data, out.residual.data) and np.array_equal(skip.data, out.skip.data)


def test_single_stack_tcn_is_stack_skip(rng):
    tcn = TCN(rng, 1, 2, "ic", 2, 4)
    x = Tensor(rng.standard_normal((5, 3, 2)))
    assert np.array_equal(tcn(x).data, tcn.stacks[0](x)[1].data)
    assert tcn.num_blocks == 2


def test_unknown_block_kind(rng):
    with pytest.raises(ConfigError):
        Stack(rng, 2, "xyz", 3, 3)


@pytest.mark.parametrize("kind,shape", [("1d", (6, 3)), ("ic", (5, 3, 2))])
def test_tcn_gradient(rng, kind, shape):
    tcn = TCN(rng, 2, 2, kind, shape[-1], 4)
    R = Tensor(rng.standard_normal(shape))
    assert grad_check(lambda t: (tcn(t) * R).sum(), rng.standard_normal(shape)) < 1e-5


@pytest.mark.parametrize("C", [1, 2, 4])
def test_tcn3d_channel_isolation(rng, C):
    tcn = TCN3D(rng, C, 2, 2, 3, 4)
    x = rng.standard_normal((6, 3, C))
    before = tcn(Tensor(x)).data
    for p in tcn.slices[0].parameters():
        p.data[...] = 0.0
    after = tcn(Tensor(x)).data
    assert np.array_equal(before[:, :, 1:], after[:, :, 1:])
    x2 = x.copy()
    x2[:, :, 0] += 1.0
    assert np.array_equal(tcn(Tensor(x2)).data[:, :, 1:], after[:, :, 1:])


def test_tcn3d_rejects_wrong_channel_count(rng):
    with pytest.raises(ShapeError):
        TCN3D(rng, 2, 1, 1, 3, 4)(Tensor(np.ones((4, 3, 3))))


def test_scaled_features():
    assert scaled_features(128, 1) == 90
    assert scaled_features(128, 2) == 64
    assert scaled_features(64, 1) == 45
    assert downsized_schedule(128, 64) == [(128, 64), (90, 32), (64, 16)]
    assert upsized_schedule(128, 64) == [(64, 16), (90, 32), (128, 64)]


def test_constant_schedule_equals_plain_tcn():
    a = ScheduledTCN(np.random.default_rng(3), [(4, 2)] * 2, D=2, hidden_ratio=2)
    b = TCN(np.random.default_rng(3), 2, 2, "ic", 2, 4)
    assert not a.transitions[0].parameters() and not a.skip_resizers[0].parameters()
    x = Tensor(np.random.default_rng(4).standard_normal((5, 4, 2)))
    assert np.array_equal(a(x).data, b(x).data)


@pytest.mark.parametrize("make", [downsized_schedule, upsized_schedule])
def test_scheduled_tcn_output_dims_and_gradient(rng, make):
    sched = make(8, 4, 3)
    tcn = ScheduledTCN(rng, sched, D=1, hidden_ratio=2)
    n0, c0 = tcn.input_dims
    x0 = rng.standard_normal((3, n0, c0))
    out = tcn(Tensor(x0))
    assert out.shape == (3, 8, 4)
    R = Tensor(rng.standard_normal(out.shape))
    assert grad_check(lambda t: (tcn(t) * R).sum(), x0) < 1e-5


def test_receptive_field_examples():
    assert receptive_field(1, 1, 3) == 3
    assert receptive_field(2, 1, 3) == 7
    assert receptive_field(8, 3, 3) == 1531
    assert receptive_field(3, 2, 3) == 29


def impulse_support(tcn, x, frame):
    with record_norm_statistics() as stats:
        base = tcn(Tensor(x)).data
    x2 = x.copy()
    x2[frame] += 1.0
    with replay_norm_statistics(stats):
        moved = tcn(Tensor(x2)).data
    return np.flatnonzero(np.any(moved != base, axis=tuple(range(1, x.ndim))))


@pytest.mark.parametrize("D,S", [(1, 1), (2, 1), (3, 2)])
def test_impulse_support_matches_receptive_field(rng, D, S):
    tcn = TCN(rng, S, D, "1d", 3, 4)
    L, frame = 60, 30
    changed = impulse_support(tcn, rng.standard_normal((L, 3)), frame)
    radius = (receptive_field(D, S) - 1) // 2
    assert changed.tolist() == list(range(frame - radius, frame + radius + 1))


def test_ic_impulse_support(rng):
    tcn = TCN(rng, 2, 2, "ic", 2, 3)
    changed = impulse_support(tcn, rng.standard_normal((40, 3, 2)), 20)
    assert changed.tolist() == list(range(20 - 6, 20 + 7))

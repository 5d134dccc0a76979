import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relfb import ndcore as nd
from relfb.ndcore import ContractError, ConfigError, Tape, Tensor


def _check(loss_fn, params, tol=1e-6):
    report = nd.finite_diff_gradcheck(loss_fn, params, delta=1e-6, tol=tol)
    assert report.passed, report.errors


def test_sigmoid_zero():
    assert nd.sigmoid(Tensor(0.0)).item() == 0.5


def test_sigmoid_extremes_are_finite():
    y = nd.sigmoid(Tensor([-800.0, 800.0])).data
    assert np.all(np.isfinite(y))
    assert y[0] >= 0 and y[1] <= 1


def test_conv1d_valid_length():
    out = nd.conv1d_valid(Tensor(np.arange(5.0)), Tensor([1.0, 0.0, -1.0]))
    assert out.shape == (3,)


def test_conv1d_matches_numpy_convolve():
    rng = np.random.default_rng(0)
    x, w = rng.standard_normal(50), rng.standard_normal(7)
    np.testing.assert_allclose(nd.conv1d_valid(Tensor(x), Tensor(w)).data, np.convolve(x, w, "valid"), atol=1e-12)


def test_conv1d_bank_columns():
    rng = np.random.default_rng(1)
    x, bank = rng.standard_normal((2, 3, 40)), rng.standard_normal((4, 9))
    out = nd.conv1d_valid(Tensor(x), Tensor(bank)).data
    assert out.shape == (2, 3, 32, 4)
    for f in range(4):
        np.testing.assert_allclose(out[1, 2, :, f], np.convolve(x[1, 2], bank[f], "valid"), atol=1e-12)


def test_conv1d_kernel_too_long():
    with pytest.raises(ContractError):
        nd.conv1d_valid(Tensor(np.ones(3)), Tensor(np.ones(4)))


def test_mean_backward_splits_evenly():
    x = Tensor(np.arange(4.0), requires_grad=True)
    with Tape() as tape:
        tape.backward(nd.scale(nd.mean(x, axis=0), 3.0))
    np.testing.assert_allclose(x.grad, np.full(4, 0.75))


def test_shape_mismatch_is_contract_error():
    with pytest.raises(ContractError):
        nd.add(Tensor(np.ones(3)), Tensor(np.ones(4)))
    with pytest.raises(ContractError):
        nd.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_nan_input_rejected():
    with pytest.raises(ContractError):
        nd.matmul(Tensor([[np.nan]]), Tensor([[1.0]]))


def test_log_floor():
    y = nd.log_floor(Tensor([0.0, 1.0, math.e]), 1e-10).data
    np.testing.assert_allclose(y, [math.log(1e-10), 0.0, 1.0])


def test_no_tape_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    y = nd.square(x)
    assert y.data.sum() == 3 and x.grad is None
    assert nd.no_grad_active()


def test_gradient_accumulates_over_reuse():
    x = Tensor([2.0], requires_grad=True)
    with Tape() as tape:
        tape.backward(nd.mean(nd.add(nd.mul(x, x), x), axis=0))
    np.testing.assert_allclose(x.grad, [5.0])


@pytest.mark.parametrize("op", ["square", "sigmoid", "relu", "log_floor", "transpose", "take", "concat"])
def test_elementwise_and_shape_ops_gradcheck(op):
    rng = np.random.default_rng(2)
    x = Tensor(rng.uniform(0.5, 2.0, (3, 4)) * rng.choice([-1, 1], (3, 4)) if op == "relu" else
               rng.uniform(0.5, 2.0, (3, 4)), requires_grad=True)
    w = rng.standard_normal((3, 4)) if op not in ("transpose",) else rng.standard_normal((4, 3))

    def loss():
        if op == "transpose":
            y = nd.transpose(x, (1, 0))
        elif op == "take":
            y = nd.take(x, np.array([[0, 1], [1, 1], [3, 2]]), axis=1)
            return nd.mean(nd.reshape(nd.square(y), (-1,)), axis=0)
        elif op == "concat":
            y = nd.concat([nd.take(x, [0], axis=0), nd.take(x, [2, 1], axis=0)], axis=0)
        else:
            y = getattr(nd, op)(x)
        return nd.mean(nd.reshape(nd.mul(y, Tensor(w)), (-1,)), axis=0)

    _check(loss, {"x": x})


def test_conv_pool_softmax_gradcheck():
    rng = np.random.default_rng(3)
    x = Tensor(rng.standard_normal((2, 2, 6, 7)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 2, 3, 3)) * 0.3, requires_grad=True)
    b = Tensor(rng.standard_normal(3) * 0.1, requires_grad=True)
    target = np.array([[0.3, 0.7, 0.0], [0.0, 0.0, 1.0]])

    def loss():
        h = nd.relu(nd.add_bias(nd.conv2d_valid(x, w), b, axis=1))
        h = nd.maxpool2d(h, 2)  # (2, 3, 2, 2)
        logits = nd.mean(nd.reshape(h, (2, 3, 4)), axis=-1)
        return nd.softmax_cross_entropy(logits, target)

    _check(loss, {"x": x, "w": w, "b": b}, tol=1e-5)


def test_conv1d_bank_gradcheck():
    rng = np.random.default_rng(4)
    x = Tensor(rng.standard_normal((2, 20)), requires_grad=True)
    w = Tensor(rng.standard_normal((3, 5)), requires_grad=True)
    _check(lambda: nd.mean(nd.reshape(nd.square(nd.conv1d_valid(x, w)), (-1,)), axis=0), {"x": x, "w": w})


def test_minmax_scale_contract_and_gradient():
    x = nd.minmax_scale(Tensor(np.array([[[2.0, 4.0, 6.0]], [[5.0, 5.0, 5.0]]]))).data
    np.testing.assert_allclose(x, [[[0.0, 0.5, 1.0]], [[0.0, 0.0, 0.0]]])
    rng = np.random.default_rng(5)
    p = Tensor(rng.standard_normal((2, 3, 4)), requires_grad=True)
    w = rng.standard_normal((2, 3, 4))
    _check(lambda: nd.mean(nd.reshape(nd.mul(nd.minmax_scale(p), Tensor(w)), (-1,)), axis=0), {"p": p})


def test_softmax_cross_entropy_integer_targets():
    logits = Tensor(np.log([[1.0, 3.0], [1.0, 1.0]]))
    loss = nd.softmax_cross_entropy(logits, np.array([1, 0])).item()
    assert loss == pytest.approx(-(math.log(0.75) + math.log(0.5)) / 2)


# -- optimiser and schedule -----------------------------------------------------


def test_sgd_without_momentum_is_plain_sgd():
    p = Tensor([1.0])
    nd.SGDMomentum(0.0).step({"p": p}, {"p": np.array([0.5])}, 0.1)
    assert p.data[0] == pytest.approx(0.95)


def test_sgd_momentum_two_steps():
    # v1 = 1, p1 = p0 - 0.1; v2 = 0.9 + 1, p2 = p1 - 0.19
    p, opt = Tensor([2.0]), nd.SGDMomentum(0.9)
    for _ in range(2):
        opt.step({"p": p}, {"p": np.array([1.0])}, 0.1)
    assert p.data[0] == pytest.approx(2.0 - 0.1 - 0.19, abs=1e-15)


def test_sgd_refuses_nonfinite_and_names_parameter():
    p, q = Tensor([1.0]), Tensor([1.0])
    with pytest.raises(nd.NonFiniteGradientError, match="bad"):
        nd.SGDMomentum(0.9).step({"good": q, "bad": p}, {"good": np.array([1.0]), "bad": np.array([np.nan])}, 0.1)
    assert q.data[0] == 1.0 and p.data[0] == 1.0


def test_sgd_lr_scale():
    p = Tensor([1.0])
    nd.SGDMomentum(0.0).step({"p": p}, {"p": np.array([1.0])}, 0.1, {"p": 0.5})
    assert p.data[0] == pytest.approx(0.95)


def test_cosine_schedule_endpoints():
    s = nd.CosineWarmRestarts(0.1, 1e-5, t0=10, t_mult=2)
    assert s(0) == pytest.approx(0.1)
    assert s(5) == pytest.approx((0.1 + 1e-5) / 2)
    assert nd.cosine_lr(10, 10, 0.1, 1e-5) == pytest.approx(1e-5)
    # restart at the end of each cycle; the second cycle is twice as long
    assert s(10) == pytest.approx(0.1)
    assert s.cycle(29) == (19.0, 20.0)
    assert s(30) == pytest.approx(0.1)


def test_cosine_schedule_rejects_bad_t0():
    with pytest.raises(ConfigError):
        nd.CosineWarmRestarts(t0=0)


@given(st.integers(0, 10_000))
@settings(max_examples=50, deadline=None)
def test_schedule_within_bounds(t):
    lr = nd.CosineWarmRestarts(0.1, 1e-5, t0=7, t_mult=1.5)(t)
    assert 1e-5 - 1e-15 <= lr <= 0.1 + 1e-15


# -- gradient checker -----------------------------------------------------------


def test_gradcheck_quadratic():
    p = Tensor([3.0])
    rep = nd.finite_diff_gradcheck(lambda: nd.mean(nd.square(p), axis=0), {"p": p}, delta=1e-5)
    assert rep.analytic["p"][0] == pytest.approx(6.0)
    assert rep.errors["p"] < 1e-9


def test_gradcheck_constant_loss():
    p = Tensor(np.ones(3))
    rep = nd.finite_diff_gradcheck(lambda: Tensor(4.0), {"p": p})
    assert np.abs(rep.analytic["p"]).max() < 1e-10 and np.abs(rep.numeric["p"]).max() < 1e-10


def test_gradcheck_detects_wrong_backward():
    p = Tensor([1.5, -0.5])

    def wrong_square(x):
        return nd.custom_op("wrong", x.data ** 2, (x,), lambda g: (g * 3.0 * x.data,))

    rep = nd.finite_diff_gradcheck(lambda: nd.mean(wrong_square(p), axis=0), {"p": p})
    assert not rep.passed

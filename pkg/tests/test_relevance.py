import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relfb import ndcore as nd
from relfb.ndcore import ContractError, Tensor
from relfb.relevance import (
    RelevanceHead,
    RelevanceNet,
    SplitScheme,
    apply_relevance,
    context_vector,
    count_frontend_params,
    head_forward,
    head_param_count,
    splice,
    split_bands,
)


def _sig(v):
    return 1.0 / (1.0 + math.exp(-v))


def brute_force_mask(segment, head):
    """Per-cell evaluation of sigma(W2 sigma(W1 y + b1) + b2), fc heads only."""
    f, T = segment.shape
    w1, b1, w2, b2 = (p.data for p in (head.w1, head.b1, head.w2, head.b2))
    out = np.zeros((f, T))
    for k in range(f):
        for j in range(T):
            y = [segment[k, min(max(j + o, 0), T - 1)] for o in range(-head.c, head.c + 1)]
            hidden = [_sig(sum(w1[h, i] * y[i] for i in range(len(y))) + b1[h]) for h in range(w1.shape[0])]
            out[k, j] = _sig(sum(w2[0, h] * hidden[h] for h in range(len(hidden))) + b2[0])
    return out


SCHEMES = {
    "40-40": SplitScheme.parse("40-40", 80),
    "even-odd": SplitScheme.even_odd(80),
    "per-band": SplitScheme.per_band(80),
    "20-25-35": SplitScheme.parse("20-25-35", 80),
}


# -- split / splice ---------------------------------------------------------------------


def test_contiguous_split_rows():
    segs = split_bands(np.arange(80.0)[:, None], SplitScheme.parse("40-40", 80))
    np.testing.assert_array_equal(segs[0][:, 0], np.arange(40))
    np.testing.assert_array_equal(segs[1][:, 0], np.arange(40, 80))


def test_even_odd_rows():
    segs = split_bands(np.arange(4.0)[:, None], SplitScheme.even_odd(4))
    np.testing.assert_array_equal(segs[0][:, 0], [0, 2])
    np.testing.assert_array_equal(segs[1][:, 0], [1, 3])


def test_equal_split_sizes():
    assert SplitScheme.equal(80, 2).sizes == (40, 40)
    assert sum(SplitScheme.equal(80, 3).sizes) == 80


def test_bad_split():
    with pytest.raises(ContractError):
        SplitScheme.parse("40-30", 80)
    with pytest.raises(ContractError):
        split_bands(np.zeros((79, 3)), SplitScheme.parse("40-40", 80))


@pytest.mark.parametrize("name", list(SCHEMES))
def test_split_splice_identity(name):
    x = np.random.default_rng(0).standard_normal((80, 13))
    scheme = SCHEMES[name]
    np.testing.assert_array_equal(splice(split_bands(x, scheme), scheme), x)


def test_splice_shape_mismatch():
    scheme = SplitScheme.parse("2-2", 4)
    with pytest.raises(ContractError):
        splice([np.zeros((2, 3)), np.zeros((2, 4))], scheme)


# -- context vectors ----------------------------------------------------------------------


def test_context_vector_rules():
    seg = np.arange(12.0).reshape(2, 6)
    assert context_vector(seg, 1, 3, 0).tolist() == [9.0]
    assert context_vector(seg, 0, 0, 2).tolist() == [0.0, 0.0, 0.0, 1.0, 2.0]
    assert context_vector(seg, 1, 5, 2).tolist() == [9.0, 10.0, 11.0, 11.0, 11.0]
    assert context_vector(seg, 0, 3, 1).tolist() == [2.0, 3.0, 4.0]


# -- heads ------------------------------------------------------------------------------


def test_zero_head_gives_half():
    head = RelevanceHead(3, 7, rng=0)
    for p in head.parameters().values():
        p.data[...] = 0.0
    np.testing.assert_array_equal(head_forward(np.random.default_rng(1).standard_normal((4, 9)), head), 0.5)


def test_head_matches_brute_force():
    rng = np.random.default_rng(2)
    for c, hidden in [(0, 3), (2, 5), (4, 6)]:
        head = RelevanceHead(c, hidden, rng=rng)
        head.b1.data = rng.standard_normal(hidden)
        head.b2.data = rng.standard_normal(1)
        seg = rng.standard_normal((10, 20))
        np.testing.assert_allclose(head_forward(seg, head), brute_force_mask(seg, head), rtol=0, atol=1e-12)


def test_conv_head_shape_and_range():
    head = RelevanceHead(3, arch="conv", rng=0)
    assert head.hidden == 8 * 5
    assert head.n_params() == head_param_count(3, arch="conv")
    w = head_forward(np.random.default_rng(3).standard_normal((2, 3, 11)), head)
    assert w.shape == (2, 3, 11) and np.all((w > 0) & (w < 1))


@given(st.integers(0, 2**31 - 1), st.integers(0, 4))
@settings(max_examples=30, deadline=None)
def test_mask_in_open_unit_interval(seed, c):
    rng = np.random.default_rng(seed)
    head = RelevanceHead(c, 6, rng=rng)
    w = head_forward(rng.standard_normal((3, 7)) * 5, head)
    assert np.all((w > 0) & (w < 1))


# -- apply_relevance ----------------------------------------------------------------------


def test_apply_relevance_examples():
    x = np.array([[1.0, -2.0]])
    np.testing.assert_allclose(apply_relevance(x, np.full((1, 2), 0.5)), 1.5 * x)
    np.testing.assert_allclose(apply_relevance(x, np.full((1, 2), 1e-12)), x, atol=1e-11)
    np.testing.assert_allclose(apply_relevance(x, np.full((1, 2), 1 - 1e-12), skip_add=False), x, atol=1e-11)


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=30, deadline=None)
def test_skip_add_bound(seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((4, 6)) * 3
    head = RelevanceHead(2, 4, rng=rng)
    out = np.abs(apply_relevance(x, head_forward(x, head)))
    assert np.all(np.abs(x) <= out) and np.all(out <= 2 * np.abs(x))


# -- the full network ------------------------------------------------------------------------


def test_relevance_net_gradcheck_including_input():
    rng = np.random.default_rng(4)
    scheme = SplitScheme.parse("3-5", 8)
    net = RelevanceNet(scheme, c=2, hidden=4, rng=rng)
    x = Tensor(rng.standard_normal((2, 8, 7)), requires_grad=True)
    w = rng.standard_normal((2, 8, 7))
    params = {"x": x, **net.parameters()}

    def loss():
        out, _ = net.forward(x)
        return nd.mean(nd.reshape(nd.mul(out, Tensor(w)), (-1,)), axis=0)

    rep = nd.finite_diff_gradcheck(loss, params, delta=1e-5, tol=1e-4)
    assert rep.passed, rep.errors


def test_even_odd_net_masks_follow_rows():
    rng = np.random.default_rng(5)
    net = RelevanceNet(SplitScheme.even_odd(6), c=1, hidden=3, rng=rng)
    x = rng.standard_normal((6, 5))
    out, masks = net.forward(Tensor(x))
    assert [m.shape for m in masks] == [(3, 5), (3, 5)]
    np.testing.assert_allclose(out.data[0::2], x[0::2] * (1 + masks[0].data))


def test_parameter_counts():
    assert head_param_count(10, 50) == 50 * 21 + 50 + 50 + 1
    assert count_frontend_params(80, 1, 10, 50) == 1231
    assert count_frontend_params(80, 0) == 80
    net = RelevanceNet(SplitScheme.equal(80, 2), c=10, hidden=50, rng=0)
    assert sum(p.data.size for p in net.parameters().values()) == 2 * head_param_count(10, 50)

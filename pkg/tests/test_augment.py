import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from relfb import augment as aug
from relfb import ndcore as nd
from relfb.ndcore import ContractError, Tensor
from relfb.relevance import SplitScheme, split_bands


def _stack(seed=0, F=12, T=15):
    return np.random.default_rng(seed).standard_normal((3, F, T))


def test_no_masks_is_identity():
    x = _stack()
    plan = aug.AugmentPlan(n_freq_masks=0, n_time_masks=0)
    np.testing.assert_array_equal(aug.spec_augment(x, plan, 1), x)


def test_full_width_time_mask_fills_channel_mean():
    x = _stack()
    mask = np.zeros(x.shape[1:], dtype=bool)
    mask[:, 4:9] = True
    out = aug.masked_fill(x, mask)
    for c in range(3):
        np.testing.assert_allclose(out[c][:, 4:9], x[c].mean())
    np.testing.assert_array_equal(out[:, :, :4], x[:, :, :4])


def test_mask_widths_respect_plan():
    plan = aug.AugmentPlan(n_freq_masks=1, max_freq_width=3, n_time_masks=0)
    rng = np.random.default_rng(2)
    for _ in range(50):
        m = aug.sample_specaug_mask(20, 10, plan, rng)
        rows = np.flatnonzero(m.any(axis=1))
        assert rows.size <= 3
        if rows.size:
            assert np.all(m[rows]) and np.all(np.diff(rows) == 1)


@pytest.mark.parametrize("text", ["6-6", "even-odd", "per-band", "3-4-5"])
@given(seed=st.integers(0, 2**31 - 1))
@settings(max_examples=15, deadline=None)
def test_aligned_specaug_commutes_with_splice(text, seed):
    scheme = SplitScheme.parse(text, 12)
    x = _stack(seed)
    plan = aug.AugmentPlan(max_freq_width=4, max_time_width=5, aligned=True)
    whole = aug.spec_augment(x, plan, seed)
    parts = aug.spec_augment_segments(split_bands(x, scheme), scheme, plan, seed)
    for got, want in zip(parts, split_bands(whole, scheme)):
        np.testing.assert_array_equal(got, want)


def test_aligned_time_masks_shared_across_heads():
    scheme = SplitScheme.parse("6-6", 12)
    plan = aug.AugmentPlan(n_freq_masks=0, n_time_masks=1, max_time_width=6, aligned=True)
    m = aug.sample_specaug_mask(12, 30, plan, np.random.default_rng(3), scheme)
    np.testing.assert_array_equal(m[0], m[6])


def test_non_aligned_draws_per_head():
    scheme = SplitScheme.parse("6-6", 12)
    plan = aug.AugmentPlan(n_freq_masks=0, n_time_masks=1, max_time_width=6, aligned=False)
    rng = np.random.default_rng(4)
    masks = [aug.sample_specaug_mask(12, 30, plan, rng, scheme) for _ in range(20)]
    assert any(not np.array_equal(m[0], m[6]) for m in masks)


def test_masked_fill_gradient():
    rng = np.random.default_rng(5)
    x = Tensor(rng.standard_normal((2, 3, 4, 5)), requires_grad=True)
    mask = rng.random((2, 1, 4, 5)) < 0.3
    w = rng.standard_normal((2, 3, 4, 5))
    rep = nd.finite_diff_gradcheck(
        lambda: nd.mean(nd.reshape(nd.mul(aug.masked_fill(x, mask), Tensor(w)), (-1,)), axis=0), {"x": x})
    assert rep.passed, rep.errors


# -- cropping ------------------------------------------------------------------------


def test_crop_identity_and_single_column():
    x = _stack()
    np.testing.assert_array_equal(aug.random_crop_time(x, 15, seed=1), x)
    one = aug.random_crop_time(x, 1, seed=1)
    assert one.shape == (3, 12, 1)
    assert any(np.array_equal(one[..., 0], x[..., t]) for t in range(15))


def test_crop_deterministic_and_bounded():
    x = _stack()
    a = aug.random_crop_time(x, 7, seed=9)
    np.testing.assert_array_equal(a, aug.random_crop_time(x, 7, seed=9))
    with pytest.raises(ContractError):
        aug.random_crop_time(x, 16, seed=0)


def test_non_aligned_crop_per_segment():
    scheme = SplitScheme.parse("6-6", 12)
    x = np.broadcast_to(np.arange(15.0), (3, 12, 15)).copy()
    out = aug.crop_time(x, [2, 5], 4, scheme)
    np.testing.assert_array_equal(out[0, 0], [2, 3, 4, 5])
    np.testing.assert_array_equal(out[0, 11], [5, 6, 7, 8])


def test_center_crop():
    assert aug.center_crop_start(10, 10) == 0
    assert aug.center_crop_start(10, 6) == 2


# -- mixup -------------------------------------------------------------------------


def test_mixup_examples():
    a, b = _stack(1), _stack(2)
    e1, e2 = np.eye(6)[0], np.eye(6)[1]
    x, y = aug.mixup(a, b, e1, e2, lam=1.0)
    np.testing.assert_array_equal(x, a)
    np.testing.assert_array_equal(y, e1)
    _, y = aug.mixup(a, b, e1, e2, lam=0.5)
    np.testing.assert_array_equal(y, [0.5, 0.5, 0, 0, 0, 0])
    with pytest.raises(ContractError):
        aug.mixup(a, b[:, :5], e1, e2, lam=0.5)


def test_mix_batch_matches_pairwise_mixup():
    x = np.random.default_rng(6).standard_normal((3, 2, 4, 5))
    partner = np.array([2, 0, 1])
    out = aug.mix_batch(Tensor(x), partner, 0.3).data
    np.testing.assert_allclose(out[1], 0.3 * x[1] + 0.7 * x[0])


# -- waveform -------------------------------------------------------------------------


def test_audio_augment_examples():
    x = np.sin(np.linspace(0, 20, 1000))
    np.testing.assert_array_equal(aug.audio_augment(x, "scale", gain=1.0), x)
    np.testing.assert_array_equal(aug.audio_augment(x, "same_class_mix", other=x, ratio=0.5), x)
    noisy = aug.audio_augment(x, "add_noise", seed=0, snr_db=60.0)
    rel = np.sqrt(np.mean((noisy - x) ** 2) / np.mean(x * x))
    assert rel < 0.002
    assert abs(np.sqrt(np.mean(noisy**2)) / np.sqrt(np.mean(x**2)) - 1) < 0.002
    with pytest.raises(ContractError):
        aug.same_class_mix(x, x[:-1])


def test_add_noise_hits_requested_snr():
    x = np.random.default_rng(7).standard_normal(4000)
    y = aug.add_noise(x, 10.0, seed=1)
    snr = 10 * np.log10(np.mean(x * x) / np.mean((y - x) ** 2))
    assert snr == pytest.approx(10.0)

"""
Aligned versus per-head augmentation
====================================

SpecAug masks and random crops can be drawn once for the whole
representation (aligned) or separately for each head's segment.
Aligned drawing commutes with split/splice: augmenting the whole and
then splitting gives the same segments as augmenting the segments.
"""

import numpy as np

from relfb import augment as aug
from relfb.relevance import SplitScheme, split_bands

rng = np.random.default_rng(0)
stack = rng.standard_normal((3, 80, 98))
scheme = SplitScheme.parse("40-40", 80)

aligned = aug.AugmentPlan(aligned=True)
whole = split_bands(aug.spec_augment(stack, aligned, rng=7), scheme)
parts = aug.spec_augment_segments(split_bands(stack, scheme), scheme, aligned, rng=7)
print("aligned SpecAug commutes with splice:", all(np.array_equal(a, b) for a, b in zip(whole, parts)))

# Non-aligned: each head gets its own time masks.
loose = aug.AugmentPlan(n_freq_masks=0, aligned=False)
m = aug.sample_specaug_mask(80, 98, loose, np.random.default_rng(3), scheme)
print("masked frames, head 0:", np.flatnonzero(m[0]).tolist()[:12], "...")
print("masked frames, head 1:", np.flatnonzero(m[40]).tolist()[:12], "...")

# Random crop to 90% of the frames, and mixup with soft labels.
crop = aug.random_crop_time(stack, 88, seed=1)
mixed, label = aug.mixup(stack, stack[:, ::-1], np.eye(6)[0], np.eye(6)[3], lam=0.7)
print("crop:", crop.shape, " mixup label:", label)

# Waveform-level helpers.
wave = np.sin(np.linspace(0, 200, 16000))
noisy = aug.audio_augment(wave, "add_noise", seed=0, snr_db=20)
print(f"noise at 20 dB: measured {10 * np.log10(np.mean(wave**2) / np.mean((noisy - wave)**2)):.2f} dB")

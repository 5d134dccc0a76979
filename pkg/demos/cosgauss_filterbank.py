"""
The cosine-modulated Gaussian filterbank
========================================

Each filter has one parameter, the centre frequency mu in cycles per
sample.  mu also sets the Gaussian width, so high filters are short and
wide-band while low filters are long and narrow.
"""

import numpy as np

from relfb import frontend as fe

sr, k = 16000, 129
mu = fe.init_mu_mel(80, sr)
print(f"80 mel-spaced centres: {mu[0] * sr:.0f} Hz .. {mu[-1] * sr:.0f} Hz")

# Kernel shape: g(0) = 1, even, and the envelope's 1/e point is at
# |n| = sqrt(2) / mu samples.
for i in (0, 40, 79):
    g = fe.synth_cosgauss_kernel(mu[i], k)
    reach = np.sqrt(2) / mu[i]
    print(f"band {i:2d}: mu={mu[i]:.4f}, envelope 1/e at {reach:7.1f} samples, "
          f"tail |g(64)| = {abs(g[-1]):.2e}")

# The analytic derivative with respect to mu against a central difference.
m, h = 0.1, 1e-6
numeric = (fe.synth_cosgauss_kernel(m + h, k) - fe.synth_cosgauss_kernel(m - h, k)) / (2 * h)
print("max |analytic - numeric| dg/dmu:", np.abs(fe.cosgauss_kernel_grad(m, k) - numeric).max())

# A one-second clip framed at 25 ms / 10 ms and passed through the bank.
cfg = fe.FrameConfig(S=400, hop=160, sample_rate=sr)
t = np.arange(sr) / sr
clip = 0.5 * np.sin(2 * np.pi * 1000 * t) + 0.01 * np.random.default_rng(0).standard_normal(sr)
frames = fe.frame_signal(clip, cfg)
rep = fe.filterbank_forward(frames, fe.FilterbankParams(mu, k))
print("representation:", rep.values.shape, "(bands x frames)")
top = rep.values.mean(axis=1).argmax()
print(f"strongest band for a 1 kHz tone: {top} at {mu[top] * sr:.0f} Hz")

# The same clip through the log-mel baseline, and the 3-channel stack the
# classifier sees.
mel = fe.mel_spectrogram(clip, cfg, n_mels=80)
stack = fe.minmax_scale(fe.delta_features(rep))
print("mel:", mel.values.shape, " scaled static/delta/delta-delta stack:", stack.shape)

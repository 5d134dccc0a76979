"""Raw-waveform front-ends.

The learnable layer convolves each analysis frame with a bank of
cosine-modulated Gaussian kernels

    g(n) = cos(2 pi mu n) * exp(-n**2 mu**2 / 2),   n = -(k-1)/2 .. (k-1)/2

where ``mu`` is the centre frequency in cycles/sample.  Each output is
squared, averaged over the frame and log-compressed, giving an F x T
time-frequency representation.  A log-mel baseline and a windowed-sinc
band-pass bank are provided for comparison.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ndcore as nd
from .ndcore import ContractError, Tensor

MU_MIN = 1e-3
MU_MAX = 0.5
LOG_EPS = 1e-10

# multiplies the analytic kernel gradient; only the gradcheck CLI touches it
_grad_corruption = 1.0


@dataclass(frozen=True)
class FrameConfig:
    S: int
    hop: int
    sample_rate: int = 16000

    def __post_init__(self):
        if not 0 < self.hop <= self.S:
            raise ContractError(f"need 0 < hop <= S, got hop={self.hop}, S={self.S}")

    def n_frames(self, n_samples: int) -> int:
        if n_samples < self.S:
            raise ContractError(f"waveform has {n_samples} samples, shorter than window {self.S}")
        return (n_samples - self.S) // self.hop + 1


@dataclass
class FilterbankParams:
    mu: np.ndarray
    k: int

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        _check_k(self.k)
        _check_mu(self.mu)

    @property
    def F(self) -> int:
        return self.mu.size


@dataclass
class TFRepresentation:
    """An F x T matrix of log energies with its band centres."""

    values: np.ndarray
    band_mu: np.ndarray
    frame_times: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


def _check_k(k: int) -> None:
    if k < 1 or k % 2 == 0:
        raise ContractError(f"kernel length must be odd and positive, got {k}")


def _check_mu(mu) -> None:
    mu = np.asarray(mu)
    if not np.all((mu > 0) & (mu <= MU_MAX)):
        raise ContractError(f"centre frequencies must lie in (0, {MU_MAX}]")


def sample_grid(k: int) -> np.ndarray:
    _check_k(k)
    h = (k - 1) // 2
    return np.arange(-h, h + 1, dtype=np.float64)


def frame_signal(waveform, cfg: FrameConfig) -> np.ndarray:
    """Cut ``waveform`` into rectangular frames, returned as an S x T matrix."""
    x = np.asarray(waveform, dtype=np.float64)
    T = cfg.n_frames(x.size)
    idx = np.arange(cfg.S)[:, None] + cfg.hop * np.arange(T)[None, :]
    return x[idx]


def synth_cosgauss_kernel(mu, k: int) -> np.ndarray:
    """Kernel(s) for scalar or 1-d ``mu``; shape (k,) or (F, k)."""
    mu = np.asarray(mu, dtype=np.float64)
    _check_mu(mu)
    n = sample_grid(k)
    m = mu[..., None]
    return np.cos(2 * np.pi * m * n) * np.exp(-(n**2) * m**2 / 2)


def cosgauss_kernel_grad(mu, k: int) -> np.ndarray:
    """Elementwise derivative of :func:`synth_cosgauss_kernel` w.r.t. ``mu``."""
    mu = np.asarray(mu, dtype=np.float64)
    _check_mu(mu)
    n = sample_grid(k)
    m = mu[..., None]
    phase = 2 * np.pi * m * n
    return (-2 * np.pi * n * np.sin(phase) - n**2 * m * np.cos(phase)) * np.exp(-(n**2) * m**2 / 2)


def cosgauss_kernels(mu: Tensor, k: int) -> Tensor:
    """Differentiable (F, k) kernel bank from a 1-d ``mu`` tensor."""
    bank = synth_cosgauss_kernel(mu.data, k)

    def backward(g):
        return ((g * cosgauss_kernel_grad(mu.data, k)).sum(axis=1) * _grad_corruption,)

    return nd.custom_op("cosgauss_kernels", bank, (mu,), backward)


def _hamming(k: int) -> np.ndarray:
    # symmetric about n = 0 so that w(0) = 1
    n = sample_grid(k)
    return 0.54 + 0.46 * np.cos(2 * np.pi * n / k)


def synth_sinc_kernel(f_low, f_high, k: int) -> np.ndarray:
    """Hamming-windowed band-pass: difference of two ideal low-pass kernels."""
    f_low = np.asarray(f_low, dtype=np.float64)
    f_high = np.asarray(f_high, dtype=np.float64)
    if np.any(f_low < 0) or np.any(f_high > 0.5) or np.any(f_low >= f_high):
        raise ContractError("sinc cutoffs must satisfy 0 <= f_low < f_high <= 0.5")
    n = sample_grid(k)
    lo, hi = f_low[..., None], f_high[..., None]
    return (2 * hi * np.sinc(2 * hi * n) - 2 * lo * np.sinc(2 * lo * n)) * _hamming(k)


def sinc_kernels(f_low: Tensor, f_high: Tensor, k: int) -> Tensor:
    bank = synth_sinc_kernel(f_low.data, f_high.data, k)
    n = sample_grid(k)
    win = _hamming(k)

    def backward(g):
        # d/df [2 f sinc(2 f n)] = 2 cos(2 pi f n)
        d_hi = 2 * np.cos(2 * np.pi * f_high.data[:, None] * n) * win
        d_lo = -2 * np.cos(2 * np.pi * f_low.data[:, None] * n) * win
        return (g * d_lo).sum(axis=1), (g * d_hi).sum(axis=1)

    return nd.custom_op("sinc_kernels", bank, (f_low, f_high), backward)


def init_sinc_cutoffs(F: int, sample_rate: float, f_min: float = 30.0):
    """Adjacent mel-spaced band edges, normalised to cycles/sample."""
    edges = mel_points(F + 1, f_min, sample_rate / 2) / sample_rate
    return edges[:-1].copy(), edges[1:].copy()


def filterbank_energies(frames: Tensor, kernels: Tensor, eps: float = LOG_EPS) -> Tensor:
    """Log mean-square response of each kernel in each frame.

    ``frames`` has shape (..., T, S) and ``kernels`` (F, k); the result has
    shape (..., F, T).
    """
    if kernels.shape[-1] > frames.shape[-1]:
        raise ContractError(f"kernel length {kernels.shape[-1]} exceeds frame length {frames.shape[-1]}")
    y = nd.conv1d_valid(frames, kernels)  # (..., T, L, F)
    energy = nd.log_floor(nd.mean(nd.square(y), axis=-2), eps)  # (..., T, F)
    nlead = energy.data.ndim - 2
    return nd.transpose(energy, tuple(range(nlead)) + (nlead + 1, nlead))


def filterbank_forward(frames, params: FilterbankParams, eps: float = LOG_EPS) -> TFRepresentation:
    """Apply the cosine-Gaussian bank to an S x T frame matrix."""
    frames = np.asarray(frames, dtype=np.float64)
    if frames.ndim != 2:
        raise ContractError("frames must be an S x T matrix")
    if params.k > frames.shape[0]:
        raise ContractError(f"kernel length {params.k} exceeds window {frames.shape[0]}")
    bank = Tensor(synth_cosgauss_kernel(params.mu, params.k))
    values = filterbank_energies(Tensor(frames.T), bank, eps).data
    return TFRepresentation(values, params.mu.copy(), np.arange(frames.shape[1]))


def band_order(mu) -> np.ndarray:
    return np.argsort(np.asarray(mu), kind="stable")


def order_bands(rep: TFRepresentation, params: FilterbankParams | None = None) -> TFRepresentation:
    """Sort rows by centre frequency (stable for ties)."""
    mu = rep.band_mu if params is None else params.mu
    perm = band_order(mu)
    return TFRepresentation(rep.values[perm], np.asarray(mu)[perm], rep.frame_times)


# -- mel baseline -------------------------------------------------------------


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_points(n: int, f_lo: float, f_hi: float) -> np.ndarray:
    return mel_to_hz(np.linspace(hz_to_mel(f_lo), hz_to_mel(f_hi), n))


def init_mu_mel(F: int, sample_rate: float, f_min: float = 30.0) -> np.ndarray:
    """F centres equally spaced in mel between ``f_min`` and Nyquist (exclusive)."""
    if F < 1:
        raise ContractError("need at least one filter")
    return mel_points(F + 2, f_min, sample_rate / 2)[1:-1] / sample_rate


def next_pow2(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


def power_spectrum(frames, nfft: int | None = None, window: str | None = "hann") -> np.ndarray:
    """One-sided |DFT|^2 / nfft of each column of an S x T frame matrix.

    Frames are zero-padded to ``nfft`` (default: next power of two).
    Summing the two-sided spectrum returns the frame energy.
    """
    frames = np.asarray(frames, dtype=np.float64)
    S = frames.shape[0]
    nfft = nfft or next_pow2(S)
    if window == "hann":
        frames = frames * np.hanning(S + 2)[1:-1, None]
    elif window is not None:
        raise ValueError(f"unknown window {window!r}")
    spec = np.fft.rfft(frames, n=nfft, axis=0)
    return (spec.real**2 + spec.imag**2) / nfft


def mel_filterbank(n_mels: int, nfft: int, sample_rate: float) -> np.ndarray:
    """Triangular filters (n_mels x nfft//2+1) spanning 0 Hz to Nyquist."""
    edges = mel_points(n_mels + 2, 0.0, sample_rate / 2)
    freqs = np.arange(nfft // 2 + 1) * sample_rate / nfft
    lo, mid, hi = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (freqs - lo) / (mid - lo)
    down = (hi - freqs) / (hi - mid)
    return np.maximum(0.0, np.minimum(up, down))


def mel_centers_hz(n_mels: int, sample_rate: float) -> np.ndarray:
    return mel_points(n_mels + 2, 0.0, sample_rate / 2)[1:-1]


def mel_spectrogram(waveform, cfg: FrameConfig, n_mels: int = 80, eps: float = LOG_EPS) -> TFRepresentation:
    frames = frame_signal(waveform, cfg)
    nfft = next_pow2(cfg.S)
    power = power_spectrum(frames, nfft, window="hann")
    fb = mel_filterbank(n_mels, nfft, cfg.sample_rate)
    values = np.log(np.maximum(fb @ power, eps))
    mu = mel_centers_hz(n_mels, cfg.sample_rate) / cfg.sample_rate
    return TFRepresentation(values, mu, np.arange(frames.shape[1]) * cfg.hop)


# -- delta features and scaling ----------------------------------------------


def delta_matrix(T: int, window: int = 2) -> np.ndarray:
    """Matrix D with ``x @ D`` = regression deltas of each row of x.

    Frames beyond the edges are replicated from the first/last frame.
    """
    if T <= 2 * window:
        raise ContractError(f"need more than {2 * window} frames for delta window {window}, got {T}")
    D = np.zeros((T, T))
    denom = 2.0 * sum(w * w for w in range(1, window + 1))
    t = np.arange(T)
    for w in range(1, window + 1):
        np.add.at(D, (np.minimum(t + w, T - 1), t), w / denom)
        np.add.at(D, (np.maximum(t - w, 0), t), -w / denom)
    return D


def delta_stack(x: Tensor, window: int = 2) -> Tensor:
    """Stack (static, delta, delta-delta) on a new axis before the last two."""
    D = Tensor(delta_matrix(x.shape[-1], window))
    d1 = nd.matmul(x, D)
    d2 = nd.matmul(d1, D)
    lead = x.shape[:-2]
    parts = [nd.reshape(t, lead + (1,) + x.shape[-2:]) for t in (x, d1, d2)]
    return nd.concat(parts, axis=len(lead))


def delta_features(rep, window: int = 2) -> np.ndarray:
    """3 x F x T stack of static, delta and delta-delta features."""
    values = rep.values if isinstance(rep, TFRepresentation) else np.asarray(rep, dtype=np.float64)
    return delta_stack(Tensor(values), window).data


def minmax_scale(stack) -> np.ndarray:
    """Scale each channel (last two axes) to [0, 1]; constant channels become zeros."""
    return nd.minmax_scale(Tensor(stack)).data

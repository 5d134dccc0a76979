"""Spectrogram- and waveform-level augmentation.

Spectrogram augmentations act on (channels, F, T) stacks.  With
``aligned=True`` the random positions are drawn once for the whole
representation, so every relevance head sees the same time masks and
crop; with ``aligned=False`` each head's segment is drawn independently.
Everything is a deterministic function of its inputs and seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ndcore as nd
from .ndcore import ContractError, Tensor
from .relevance import SplitScheme, splice, split_bands


@dataclass(frozen=True)
class AugmentPlan:
    seed: int = 0
    n_freq_masks: int = 2
    max_freq_width: int = 8
    n_time_masks: int = 2
    max_time_width: int = 20
    crop_fraction: float = 0.9
    mixup_alpha: float = 0.2
    aligned: bool = True

    def crop_length(self, T: int) -> int:
        return max(1, int(round(self.crop_fraction * T)))


def _rng(seed_or_rng) -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def _draw_mask(F: int, T: int, plan: AugmentPlan, rng: np.random.Generator) -> np.ndarray:
    mask = np.zeros((F, T), dtype=bool)
    for _ in range(plan.n_freq_masks):
        w = int(rng.integers(0, min(plan.max_freq_width, F) + 1))
        f0 = int(rng.integers(0, F - w + 1))
        mask[f0 : f0 + w, :] = True
    for _ in range(plan.n_time_masks):
        w = int(rng.integers(0, min(plan.max_time_width, T) + 1))
        t0 = int(rng.integers(0, T - w + 1))
        mask[:, t0 : t0 + w] = True
    return mask


def sample_specaug_mask(F: int, T: int, plan: AugmentPlan, rng=None,
                        scheme: SplitScheme | None = None) -> np.ndarray:
    """Boolean F x T mask of cells to overwrite.

    Aligned (or no scheme): one draw over all F bands.  Non-aligned: an
    independent draw per head segment.
    """
    rng = _rng(plan.seed if rng is None else rng)
    if plan.aligned or scheme is None:
        return _draw_mask(F, T, plan, rng)
    scheme.check(F)
    mask = np.zeros((F, T), dtype=bool)
    for rows in scheme.rows():
        mask[rows] = _draw_mask(rows.size, T, plan, rng)
    return mask


def masked_fill(stack, mask: np.ndarray):
    """Set masked cells of every channel to that channel's mean.

    ``stack`` is (..., C, F, T), a Tensor or array; ``mask`` broadcasts to
    it.  The fill value is the pre-mask channel mean and is differentiable.
    """
    tensor_in = isinstance(stack, Tensor)
    x = stack if tensor_in else Tensor(stack)
    lead, (F, T) = x.shape[:-2], x.shape[-2:]
    flat = nd.reshape(x, lead + (1, F * T))
    fill = nd.matmul(nd.reshape(nd.mean(flat, axis=-1), lead + (1, 1)),
                     Tensor(np.ones((1, F * T))))
    m = np.broadcast_to(mask, x.shape).astype(np.float64)
    keep = nd.mul(x, Tensor(1.0 - m))
    out = nd.add(keep, nd.mul(nd.reshape(fill, x.shape), Tensor(m)))
    return out if tensor_in else out.data


def spec_augment(stack, plan: AugmentPlan, rng=None, scheme: SplitScheme | None = None) -> np.ndarray:
    stack = np.asarray(stack, dtype=np.float64)
    if plan.n_freq_masks == 0 and plan.n_time_masks == 0:
        return stack.copy()
    mask = sample_specaug_mask(stack.shape[-2], stack.shape[-1], plan, rng, scheme)
    return masked_fill(stack, mask)


def spec_augment_segments(segments, scheme: SplitScheme, plan: AugmentPlan, rng=None) -> list[np.ndarray]:
    """SpecAug applied to per-head segments of a (C, F, T) stack.

    Masks follow the plan's alignment; fill values are the channel means
    of the full spliced representation.
    """
    full = splice(list(segments), scheme)
    mask = sample_specaug_mask(full.shape[-2], full.shape[-1], plan, rng, scheme)
    lead = full.shape[:-2]
    # same reduction as masked_fill so results agree bit for bit
    fill = full.reshape(lead + (1, -1)).mean(axis=-1).reshape(lead + (1, 1))
    out = []
    for seg, rows in zip(segments, scheme.rows()):
        m = mask[rows]
        out.append(np.where(m, fill, seg))
    return out


def sample_crop_starts(T: int, crop_T: int, n_groups: int, aligned: bool, rng=None) -> list[int]:
    if crop_T > T or crop_T < 1:
        raise ContractError(f"crop length {crop_T} must be in [1, {T}]")
    rng = _rng(rng)
    if aligned:
        return [int(rng.integers(0, T - crop_T + 1))] * n_groups
    return [int(rng.integers(0, T - crop_T + 1)) for _ in range(n_groups)]


def crop_time(x, starts: list[int], crop_T: int, scheme: SplitScheme | None = None):
    """Keep frames ``[s, s + crop_T)``; one start per head segment."""
    tensor_in = isinstance(x, Tensor)
    xt = x if tensor_in else Tensor(x)
    if len(set(starts)) == 1 or scheme is None:
        out = nd.take(xt, np.arange(starts[0], starts[0] + crop_T), axis=-1)
    else:
        segs = split_bands(xt, scheme)
        segs = [nd.take(s, np.arange(a, a + crop_T), axis=-1) for s, a in zip(segs, starts)]
        out = splice(segs, scheme)
    return out if tensor_in else out.data


def random_crop_time(stack, crop_T: int, seed=None, scheme: SplitScheme | None = None,
                     aligned: bool = True) -> np.ndarray:
    stack = np.asarray(stack, dtype=np.float64)
    groups = 1 if scheme is None else scheme.n_heads
    starts = sample_crop_starts(stack.shape[-1], crop_T, groups, aligned or scheme is None, seed)
    return crop_time(stack, starts, crop_T, scheme)


def center_crop_start(T: int, crop_T: int) -> int:
    if crop_T > T:
        raise ContractError(f"crop length {crop_T} exceeds {T} frames")
    return (T - crop_T) // 2


def mixup(stack_a, stack_b, label_a, label_b, lam: float | None = None, alpha: float = 0.2, rng=None):
    """Convex combination of two examples and their (one-hot) labels."""
    a = np.asarray(stack_a, dtype=np.float64)
    b = np.asarray(stack_b, dtype=np.float64)
    la = np.asarray(label_a, dtype=np.float64)
    lb = np.asarray(label_b, dtype=np.float64)
    if a.shape != b.shape or la.shape != lb.shape:
        raise ContractError("mixup: shape mismatch")
    if lam is None:
        lam = float(_rng(rng).beta(alpha, alpha))
    if not 0.0 <= lam <= 1.0:
        raise ContractError(f"mixup weight {lam} outside [0, 1]")
    return lam * a + (1 - lam) * b, lam * la + (1 - lam) * lb


def mix_batch(x: Tensor, partner: np.ndarray, lam: float) -> Tensor:
    """``lam * x + (1 - lam) * x[partner]`` along the batch axis."""
    return nd.add(nd.scale(x, lam), nd.scale(nd.take(x, partner, axis=0), 1.0 - lam))


# -- waveform level -----------------------------------------------------------


def add_noise(waveform, snr_db: float, seed=None) -> np.ndarray:
    x = np.asarray(waveform, dtype=np.float64)
    power = np.mean(x * x)
    noise = _rng(seed).standard_normal(x.shape)
    noise *= np.sqrt(power / 10 ** (snr_db / 10) / np.mean(noise * noise))
    return x + noise


def scale_gain(waveform, gain: float) -> np.ndarray:
    return float(gain) * np.asarray(waveform, dtype=np.float64)


def same_class_mix(waveform, other, ratio: float = 0.5) -> np.ndarray:
    x = np.asarray(waveform, dtype=np.float64)
    y = np.asarray(other, dtype=np.float64)
    if x.shape != y.shape:
        raise ContractError(f"cannot mix clips of length {x.size} and {y.size}")
    return ratio * x + (1 - ratio) * y


def audio_augment(waveform, kind: str, seed=None, **kw) -> np.ndarray:
    """Dispatch ``add_noise(snr_db)``, ``scale(gain)`` or ``same_class_mix(other, ratio)``."""
    if kind == "add_noise":
        return add_noise(waveform, kw["snr_db"], seed)
    if kind == "scale":
        return scale_gain(waveform, kw["gain"])
    if kind == "same_class_mix":
        return same_class_mix(waveform, kw["other"], kw.get("ratio", 0.5))
    raise ValueError(f"unknown audio augmentation {kind!r}")

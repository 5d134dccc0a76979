"""Multi-head relevance weighting of a frequency-split representation.

The F x T representation is partitioned along frequency into ``h``
segments.  Each segment gets its own small network that maps the
temporal context ``[x[k, j-c], ..., x[k, j+c]]`` of every cell to a
weight in (0, 1):

    W[k, j] = sigmoid(w2 . sigmoid(W1 y[k, j] + b1) + b2)

The same network is shared by all cells of its segment.  The weighted
segments (optionally with a skip connection, ``x + W * x``) are spliced
back into band order.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ndcore as nd
from .ndcore import ContractError, Tensor

CONV_KERNELS = 8
CONV_WIDTH = 3


@dataclass(frozen=True)
class SplitScheme:
    """How F bands are partitioned across heads.

    ``mode`` is ``"contiguous"`` (consecutive blocks of ``sizes``),
    ``"even-odd"`` (rows 0, 2, 4, ... to the first head, 1, 3, ... to the
    second) or ``"per-band"`` (one head per band).
    """

    mode: str
    sizes: tuple[int, ...]

    def __post_init__(self):
        if self.mode not in ("contiguous", "even-odd", "per-band"):
            raise ContractError(f"unknown split mode {self.mode!r}")
        if any(s < 1 for s in self.sizes):
            raise ContractError(f"empty segment in split sizes {self.sizes}")

    @property
    def F(self) -> int:
        return sum(self.sizes)

    @property
    def n_heads(self) -> int:
        return len(self.sizes)

    @classmethod
    def contiguous(cls, sizes) -> "SplitScheme":
        return cls("contiguous", tuple(int(s) for s in sizes))

    @classmethod
    def even_odd(cls, F: int) -> "SplitScheme":
        return cls("even-odd", ((F + 1) // 2, F // 2))

    @classmethod
    def per_band(cls, F: int) -> "SplitScheme":
        return cls("per-band", (1,) * F)

    @classmethod
    def equal(cls, F: int, heads: int) -> "SplitScheme":
        """Near-equal contiguous blocks, larger blocks last (80/3 -> 26-27-27)."""
        if not 1 <= heads <= F:
            raise ContractError(f"cannot split {F} bands into {heads} heads")
        base, extra = divmod(F, heads)
        return cls.contiguous([base + (i >= heads - extra) for i in range(heads)])

    @classmethod
    def parse(cls, text: str, F: int, heads: int | None = None) -> "SplitScheme":
        """Parse ``"40-40"``, ``"even-odd"``, ``"per-band"`` or ``"equal"``."""
        text = text.strip()
        if text == "even-odd":
            scheme = cls.even_odd(F)
        elif text == "per-band":
            scheme = cls.per_band(F)
        elif text == "equal":
            scheme = cls.equal(F, heads or 1)
        else:
            try:
                scheme = cls.contiguous(int(s) for s in text.split("-"))
            except ValueError:
                raise ContractError(f"bad split spec {text!r}") from None
        scheme.check(F)
        if heads is not None and scheme.n_heads != heads:
            raise ContractError(f"split {text!r} has {scheme.n_heads} heads, expected {heads}")
        return scheme

    def check(self, F: int) -> None:
        if self.F != F:
            raise ContractError(f"split sizes {self.sizes} sum to {self.F}, not F={F}")

    def rows(self) -> list[np.ndarray]:
        """Band indices owned by each head."""
        F = self.F
        if self.mode == "even-odd":
            return [np.arange(0, F, 2), np.arange(1, F, 2)]
        bounds = np.cumsum((0,) + self.sizes)
        return [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:])]

    def inverse(self) -> np.ndarray:
        """Permutation taking concatenated segment rows back to band order."""
        return np.argsort(np.concatenate(self.rows()), kind="stable")


def split_bands(x, scheme: SplitScheme):
    """Split rows (axis -2) of ``x`` into per-head segments.

    Accepts a Tensor (differentiable) or an array (returns arrays).
    """
    tensor_in = isinstance(x, Tensor)
    xt = x if tensor_in else Tensor(x)
    scheme.check(xt.shape[-2])
    segs = [nd.take(xt, rows, axis=-2) for rows in scheme.rows()]
    return segs if tensor_in else [s.data for s in segs]


def splice(segments, scheme: SplitScheme):
    """Inverse of :func:`split_bands`."""
    tensor_in = isinstance(segments[0], Tensor)
    segs = [s if isinstance(s, Tensor) else Tensor(s) for s in segments]
    if len(segs) != scheme.n_heads:
        raise ContractError(f"expected {scheme.n_heads} segments, got {len(segs)}")
    for s, size in zip(segs, scheme.sizes):
        if s.shape[-2] != size:
            raise ContractError(f"segment with {s.shape[-2]} rows where {size} expected")
    out = nd.take(nd.concat(segs, axis=-2), scheme.inverse(), axis=-2)
    return out if tensor_in else out.data


def context_index(T: int, c: int) -> np.ndarray:
    """(T, 2c+1) frame indices of each context window, edges replicated."""
    return np.clip(np.arange(T)[:, None] + np.arange(-c, c + 1)[None, :], 0, T - 1)


def context_vector(segment, k: int, j: int, c: int) -> np.ndarray:
    segment = np.asarray(segment)
    return segment[k, context_index(segment.shape[1], c)[j]]


class RelevanceHead:
    """One weighting sub-network.

    ``arch="fc"``: ``w1`` is (hidden, 2c+1).  ``arch="conv"``: the first
    layer is 8 kernels of width 3 slid over the context vector (``w1`` is
    (8, 3), ``b1`` is (8,)), flattened to a hidden layer of 8(2c-1) units.
    """

    def __init__(self, c: int, hidden: int = 50, arch: str = "fc", rng=None, name: str = "head"):
        if c < 0:
            raise ContractError("context half-width must be non-negative")
        if arch not in ("fc", "conv"):
            raise ContractError(f"unknown head architecture {arch!r}")
        if arch == "conv" and 2 * c + 1 < CONV_WIDTH:
            raise ContractError("conv head needs c >= 1")
        rng = np.random.default_rng(rng)
        self.c, self.arch, self.name = c, arch, name
        d = 2 * c + 1
        if arch == "fc":
            self.hidden = hidden
            w1 = rng.normal(0, 1 / np.sqrt(d), (hidden, d))
            b1 = np.zeros(hidden)
        else:
            self.hidden = CONV_KERNELS * (d - CONV_WIDTH + 1)
            w1 = rng.normal(0, 1 / np.sqrt(CONV_WIDTH), (CONV_KERNELS, CONV_WIDTH))
            b1 = np.zeros(CONV_KERNELS)
        w2 = rng.normal(0, 1 / np.sqrt(self.hidden), (1, self.hidden))
        self.w1 = Tensor(w1, requires_grad=True, name=f"{name}.w1")
        self.b1 = Tensor(b1, requires_grad=True, name=f"{name}.b1")
        self.w2 = Tensor(w2, requires_grad=True, name=f"{name}.w2")
        self.b2 = Tensor(np.zeros(1), requires_grad=True, name=f"{name}.b2")

    def parameters(self) -> dict[str, Tensor]:
        return {t.name: t for t in (self.w1, self.b1, self.w2, self.b2)}

    def n_params(self) -> int:
        return sum(t.data.size for t in self.parameters().values())

    def forward(self, segment: Tensor) -> Tensor:
        """Mask of the same shape as ``segment`` (..., f, T)."""
        T = segment.shape[-1]
        y = nd.take(segment, context_index(T, self.c), axis=-1)  # (..., f, T, 2c+1)
        if self.arch == "fc":
            pre = nd.matmul(y, nd.transpose(self.w1, (1, 0)))
        else:
            d = 2 * self.c + 1
            win = np.arange(d - CONV_WIDTH + 1)[:, None] + np.arange(CONV_WIDTH)[None, :]
            z = nd.take(y, win, axis=-1)  # (..., f, T, d-2, 3)
            pre = nd.matmul(z, nd.transpose(self.w1, (1, 0)))  # (..., f, T, d-2, 8)
            pre = nd.reshape(nd.add_bias(pre, self.b1), pre.shape[:-2] + (self.hidden,))
        if self.arch == "fc":
            pre = nd.add_bias(pre, self.b1)
        h = nd.sigmoid(pre)
        out = nd.sigmoid(nd.add_bias(nd.matmul(h, nd.transpose(self.w2, (1, 0))), self.b2))
        return nd.reshape(out, segment.shape)


def head_forward(segment, head: RelevanceHead) -> np.ndarray:
    return head.forward(Tensor(segment)).data


def apply_relevance(segment, mask, skip_add: bool = True):
    """``x + W*x`` with the skip connection, ``W*x`` without."""
    tensor_in = isinstance(segment, Tensor)
    x = segment if tensor_in else Tensor(segment)
    w = mask if isinstance(mask, Tensor) else Tensor(mask)
    weighted = nd.mul(x, w)
    out = nd.add(x, weighted) if skip_add else weighted
    return out if tensor_in else out.data


class RelevanceNet:
    """Split, weight each segment with its own head, splice."""

    def __init__(self, scheme: SplitScheme, c: int = 10, hidden: int = 50, arch: str = "fc",
                 skip_add: bool = True, rng=None):
        rng = np.random.default_rng(rng)
        self.scheme, self.skip_add = scheme, skip_add
        self.heads = [RelevanceHead(c, hidden, arch, rng, name=f"head{i}") for i in range(scheme.n_heads)]

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for h in self.heads:
            out.update(h.parameters())
        return out

    def forward(self, x: Tensor) -> tuple[Tensor, list[Tensor]]:
        segments = split_bands(x, self.scheme)
        masks = [h.forward(s) for h, s in zip(self.heads, segments)]
        enhanced = [apply_relevance(s, m, self.skip_add) for s, m in zip(segments, masks)]
        return splice(enhanced, self.scheme), masks


def head_param_count(c: int, hidden: int = 50, arch: str = "fc") -> int:
    d = 2 * c + 1
    if arch == "fc":
        return hidden * d + hidden + hidden + 1
    h = CONV_KERNELS * (d - CONV_WIDTH + 1)
    return CONV_KERNELS * CONV_WIDTH + CONV_KERNELS + h + 1


def count_frontend_params(F: int, heads: int, c: int = 10, hidden: int = 50, arch: str = "fc") -> int:
    """Learnable front-end size: F centre frequencies plus the heads."""
    return F + heads * head_param_count(c, hidden, arch)

"""Dense tensors with tape-based reverse-mode differentiation.

Arrays are plain ``numpy.float64`` buffers.  A :class:`Tensor` wraps one
array plus an optional gradient.  Operations record themselves on the
active :class:`Tape` whenever at least one input requires a gradient, and
``Tape.backward`` replays the records in reverse.

There is no general broadcasting: binary operations take equal shapes,
and bias addition is explicit (:func:`add_bias`).

Example
-------
>>> w = Tensor([[1.0, 2.0]], requires_grad=True, name="w")
>>> with Tape() as tape:
...     loss = mean(square(matmul(w, Tensor([[3.0], [4.0]]))), axis=0)
...     tape.backward(loss)
>>> w.grad
array([[66., 88.]])
"""

from __future__ import annotations

import contextvars
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

__all__ = [
    "ContractError",
    "ConfigError",
    "NonFiniteGradientError",
    "Tensor",
    "Tape",
    "no_grad_active",
    "matmul",
    "conv1d_valid",
    "add",
    "add_bias",
    "mul",
    "scale",
    "square",
    "mean",
    "log_floor",
    "sigmoid",
    "relu",
    "conv2d_valid",
    "maxpool2d",
    "softmax_cross_entropy",
    "reshape",
    "transpose",
    "take",
    "concat",
    "minmax_scale",
    "custom_op",
    "SGDMomentum",
    "CosineWarmRestarts",
    "cosine_lr",
    "GradcheckReport",
    "finite_diff_gradcheck",
]

# Row chunk for im2col-style matmuls; bounds the temporary window copies.
_CHUNK_ROWS = 64


class ContractError(ValueError):
    """Raised when an operation's preconditions are violated."""


class ConfigError(ValueError):
    """Invalid configuration value."""


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str):
        super().__init__(f"non-finite gradient for parameter {name!r}")
        self.name = name


class Tensor:
    """An n-d float64 array with an optional accumulated gradient."""

    __slots__ = ("data", "grad", "requires_grad", "name", "_leaf")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.array(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._leaf = True

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label})"


@dataclass
class _Node:
    op: str
    inputs: tuple[Tensor, ...]
    out: Tensor
    backward: Callable[[np.ndarray], Sequence[np.ndarray | None]]


_active_tape: contextvars.ContextVar["Tape | None"] = contextvars.ContextVar(
    "relfb_active_tape", default=None
)


class Tape:
    """Ordered record of differentiable operations.

    Use as a context manager; operations executed inside the block are
    recorded in execution order.  A tape is single-use: call
    :meth:`backward` once.
    """

    def __init__(self):
        self.nodes: list[_Node] = []
        self.params: dict[str, Tensor] = {}
        self._token = None

    def __enter__(self) -> "Tape":
        self._token = _active_tape.set(self)
        return self

    def __exit__(self, *exc) -> None:
        _active_tape.reset(self._token)
        self._token = None

    def register(self, name: str, tensor: Tensor) -> Tensor:
        tensor.requires_grad = True
        tensor.name = name
        self.params[name] = tensor
        return tensor

    def backward(self, loss: Tensor) -> None:
        if loss.data.size != 1:
            raise ContractError(f"backward needs a scalar loss, got shape {loss.shape}")
        loss.grad = np.ones_like(loss.data)
        for node in reversed(self.nodes):
            g = node.out.grad
            if g is None:
                continue
            grads = node.backward(g)
            for inp, gi in zip(node.inputs, grads):
                if gi is None or not inp.requires_grad:
                    continue
                inp.grad = gi if inp.grad is None else inp.grad + gi
            if not node.out._leaf:
                node.out.grad = None
        self.nodes.clear()


def no_grad_active() -> bool:
    return _active_tape.get() is None


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _check_nan(op: str, *arrays: np.ndarray) -> None:
    for a in arrays:
        if np.isnan(a).any():
            raise ContractError(f"{op}: NaN in input")


def custom_op(op: str, out_data: np.ndarray, inputs: Sequence[Tensor], backward) -> Tensor:
    """Wrap ``out_data`` as the output of a recorded operation.

    ``backward(g)`` must return one gradient (or None) per input.
    """
    out = Tensor.__new__(Tensor)
    out.data = out_data
    out.grad = None
    out.name = None
    out._leaf = False
    tape = _active_tape.get()
    out.requires_grad = tape is not None and any(t.requires_grad for t in inputs)
    if out.requires_grad:
        tape.nodes.append(_Node(op, tuple(inputs), out, backward))
    return out


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ContractError(f"{op}: shape mismatch {a.shape} vs {b.shape}")


# -- elementwise ------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape("add", a, b)
    _check_nan("add", a.data, b.data)
    return custom_op("add", a.data + b.data, (a, b), lambda g: (g, g))


def add_bias(x, bias, axis: int = -1) -> Tensor:
    """Add a 1-d ``bias`` along ``axis`` of ``x``."""
    x, bias = _as_tensor(x), _as_tensor(bias)
    axis = axis % x.data.ndim
    if bias.data.ndim != 1 or bias.shape[0] != x.shape[axis]:
        raise ContractError(f"add_bias: bias {bias.shape} does not fit axis {axis} of {x.shape}")
    _check_nan("add_bias", x.data, bias.data)
    view = [1] * x.data.ndim
    view[axis] = -1
    reduce_axes = tuple(i for i in range(x.data.ndim) if i != axis)

    def backward(g):
        return g, g.sum(axis=reduce_axes)

    return custom_op("add_bias", x.data + bias.data.reshape(view), (x, bias), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    _same_shape("mul", a, b)
    _check_nan("mul", a.data, b.data)
    return custom_op("mul", a.data * b.data, (a, b), lambda g: (g * b.data, g * a.data))


def scale(x, c: float) -> Tensor:
    x = _as_tensor(x)
    _check_nan("scale", x.data)
    c = float(c)
    return custom_op("scale", x.data * c, (x,), lambda g: (g * c,))


def square(x) -> Tensor:
    x = _as_tensor(x)
    _check_nan("square", x.data)
    return custom_op("square", x.data * x.data, (x,), lambda g: (2.0 * x.data * g,))


def sigmoid(x) -> Tensor:
    x = _as_tensor(x)
    _check_nan("sigmoid", x.data)
    # tanh form is exact at 0 and never overflows
    s = 0.5 * (1.0 + np.tanh(0.5 * x.data))
    return custom_op("sigmoid", s, (x,), lambda g: (g * s * (1.0 - s),))


def relu(x) -> Tensor:
    x = _as_tensor(x)
    _check_nan("relu", x.data)
    on = x.data > 0
    return custom_op("relu", np.where(on, x.data, 0.0), (x,), lambda g: (g * on,))


def log_floor(x, eps: float = 1e-10) -> Tensor:
    """``log(max(x, eps))``; zero gradient where the floor is active."""
    if not eps > 0:
        raise ContractError("log_floor: eps must be positive")
    x = _as_tensor(x)
    _check_nan("log_floor", x.data)
    above = x.data > eps
    safe = np.where(above, x.data, eps)

    def backward(g):
        return (np.where(above, g / safe, 0.0),)

    return custom_op("log_floor", np.log(safe), (x,), backward)


# -- reductions and shape ---------------------------------------------------


def mean(x, axis: int) -> Tensor:
    x = _as_tensor(x)
    _check_nan("mean", x.data)
    axis = axis % x.data.ndim
    n = x.shape[axis]
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis) / n, shape).copy(),)

    return custom_op("mean", x.data.mean(axis=axis), (x,), backward)


def reshape(x, shape) -> Tensor:
    x = _as_tensor(x)
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as e:
        raise ContractError(f"reshape: {e}") from None
    return custom_op("reshape", out, (x,), lambda g: (g.reshape(old),))


def transpose(x, axes: Sequence[int]) -> Tensor:
    x = _as_tensor(x)
    axes = tuple(axes)
    inverse = tuple(np.argsort(axes))
    return custom_op(
        "transpose",
        np.ascontiguousarray(x.data.transpose(axes)),
        (x,),
        lambda g: (g.transpose(inverse),),
    )


def take(x, index, axis: int) -> Tensor:
    """Gather along ``axis``; repeated indices accumulate in backward."""
    x = _as_tensor(x)
    index = np.asarray(index, dtype=np.intp)
    axis = axis % x.data.ndim
    n = x.shape[axis]
    if index.size and (index.min() < -n or index.max() >= n):
        raise ContractError(f"take: index out of range for axis of size {n}")
    out = np.take(x.data, index, axis=axis)
    shape = x.shape

    def backward(g):
        gx = np.zeros(shape)
        # move gathered axes to the front so add.at scatters along axis 0
        gm = np.moveaxis(g, tuple(range(axis, axis + index.ndim)), tuple(range(index.ndim)))
        gm = gm.reshape((-1,) + gm.shape[index.ndim:])
        gxm = np.moveaxis(gx, axis, 0)
        np.add.at(gxm, index.reshape(-1), gm)
        return (gx,)

    return custom_op("take", out, (x,), backward)


def concat(xs: Sequence, axis: int) -> Tensor:
    xs = [_as_tensor(x) for x in xs]
    if not xs:
        raise ContractError("concat: empty input")
    axis = axis % xs[0].data.ndim
    try:
        out = np.concatenate([x.data for x in xs], axis=axis)
    except ValueError as e:
        raise ContractError(f"concat: {e}") from None
    bounds = np.cumsum([x.shape[axis] for x in xs])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return custom_op("concat", out, xs, backward)


# -- linear maps ------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """``a @ b`` for ``a`` of shape (..., m, n) and 2-d ``b`` of shape (n, p)."""
    a, b = _as_tensor(a), _as_tensor(b)
    if b.data.ndim != 2 or a.data.ndim < 1 or a.shape[-1] != b.shape[0]:
        raise ContractError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    _check_nan("matmul", a.data, b.data)

    def backward(g):
        ga = g @ b.data.T if a.requires_grad else None
        gb = None
        if b.requires_grad:
            a2 = a.data.reshape(-1, a.shape[-1])
            gb = a2.T @ g.reshape(-1, b.shape[1])
        return ga, gb

    return custom_op("matmul", a.data @ b.data, (a, b), backward)


def conv1d_valid(signal, kernel) -> Tensor:
    """Valid 1-d convolution along the last axis.

    ``signal`` has shape (..., N).  A 1-d ``kernel`` of length k gives
    (..., N-k+1); a 2-d kernel bank of shape (F, k) gives (..., N-k+1, F),
    one column per kernel.
    """
    x, w = _as_tensor(signal), _as_tensor(kernel)
    single = w.data.ndim == 1
    bank = w.data[None, :] if single else w.data
    if bank.ndim != 2:
        raise ContractError("conv1d_valid: kernel must be 1-d or 2-d")
    n, (nk, k) = x.shape[-1], bank.shape
    if k > n:
        raise ContractError(f"conv1d_valid: kernel length {k} exceeds signal length {n}")
    _check_nan("conv1d_valid", x.data, bank)
    lead = x.shape[:-1]
    rows = x.data.reshape(-1, n)
    flipped = np.ascontiguousarray(bank[:, ::-1].T)  # (k, F); negative strides defeat BLAS
    L = n - k + 1
    out = np.empty((rows.shape[0], L, nk))
    for s in range(0, rows.shape[0], _CHUNK_ROWS):
        win = np.ascontiguousarray(sliding_window_view(rows[s : s + _CHUNK_ROWS], k, axis=-1))
        # one 2-d gemm; batched 3-d matmul is several times slower here
        out[s : s + _CHUNK_ROWS] = (win.reshape(-1, k) @ flipped).reshape(-1, L, nk)
    out = out.reshape(lead + (L,) if single else lead + (L, nk))

    def backward(g):
        g2 = g.reshape(rows.shape[0], L, nk)
        gw = None
        if w.requires_grad:
            acc = np.zeros((k, nk))
            for s in range(0, rows.shape[0], _CHUNK_ROWS):
                win = np.ascontiguousarray(sliding_window_view(rows[s : s + _CHUNK_ROWS], k, axis=-1))
                acc += win.reshape(-1, k).T @ g2[s : s + _CHUNK_ROWS].reshape(-1, nk)
            gw = acc[::-1].T
            gw = gw[0] if single else gw
        gx = None
        if x.requires_grad:
            padded = np.pad(g2, ((0, 0), (k - 1, k - 1), (0, 0)))
            win = sliding_window_view(padded, k, axis=1)  # (M, N, F, k)
            gx = np.einsum("mnfk,fk->mn", win, bank).reshape(x.shape)
        return gx, gw

    return custom_op("conv1d_valid", out, (x, w), backward)


def conv2d_valid(x, weight) -> Tensor:
    """Valid 2-d cross-correlation, NCHW input and (O, C, kh, kw) weight."""
    x, w = _as_tensor(x), _as_tensor(weight)
    if x.data.ndim != 4 or w.data.ndim != 4 or x.shape[1] != w.shape[1]:
        raise ContractError(f"conv2d_valid: incompatible shapes {x.shape}, {w.shape}")
    B, C, H, W = x.shape
    O, _, kh, kw = w.shape
    if kh > H or kw > W:
        raise ContractError(f"conv2d_valid: kernel {kh}x{kw} larger than input {H}x{W}")
    _check_nan("conv2d_valid", x.data, w.data)
    Ho, Wo = H - kh + 1, W - kw + 1
    # (B, C, Ho, Wo, kh, kw) -> (B, Ho, Wo, C*kh*kw)
    cols = sliding_window_view(x.data, (kh, kw), axis=(2, 3))
    cols = np.ascontiguousarray(cols.transpose(0, 2, 3, 1, 4, 5)).reshape(B, Ho, Wo, -1)
    wmat = w.data.reshape(O, -1).T
    out = np.ascontiguousarray((cols @ wmat).transpose(0, 3, 1, 2))

    def backward(g):
        gt = g.transpose(0, 2, 3, 1)  # (B, Ho, Wo, O)
        gw = None
        if w.requires_grad:
            gw = (cols.reshape(-1, cols.shape[-1]).T @ gt.reshape(-1, O)).T.reshape(w.shape)
        gx = None
        if x.requires_grad:
            gcols = (gt @ wmat.T).reshape(B, Ho, Wo, C, kh, kw)
            gx = np.zeros(x.shape)
            for i in range(kh):
                for j in range(kw):
                    gx[:, :, i : i + Ho, j : j + Wo] += gcols[:, :, :, :, i, j].transpose(0, 3, 1, 2)
        return gx, gw

    return custom_op("conv2d_valid", out, (x, w), backward)


def maxpool2d(x, size: int = 2) -> Tensor:
    """Non-overlapping max pooling over the last two axes (floor on sizes)."""
    x = _as_tensor(x)
    if x.data.ndim < 2:
        raise ContractError("maxpool2d: need at least 2 dims")
    H, W = x.shape[-2:]
    Ho, Wo = H // size, W // size
    if Ho == 0 or Wo == 0:
        raise ContractError(f"maxpool2d: input {H}x{W} too small for pool {size}")
    _check_nan("maxpool2d", x.data)
    lead = x.shape[:-2]
    core = x.data[..., : Ho * size, : Wo * size].reshape(lead + (Ho, size, Wo, size))
    core = np.moveaxis(core, -3, -2).reshape(lead + (Ho, Wo, size * size))
    arg = core.argmax(axis=-1)  # first max wins on ties
    out = np.take_along_axis(core, arg[..., None], axis=-1)[..., 0]

    def backward(g):
        blocks = np.zeros(lead + (Ho, Wo, size * size))
        np.put_along_axis(blocks, arg[..., None], g[..., None], axis=-1)
        blocks = blocks.reshape(lead + (Ho, Wo, size, size))
        blocks = np.moveaxis(blocks, -2, -3).reshape(lead + (Ho * size, Wo * size))
        gx = np.zeros(x.shape)
        gx[..., : Ho * size, : Wo * size] = blocks
        return (gx,)

    return custom_op("maxpool2d", out, (x,), backward)


# -- losses and normalisation -----------------------------------------------


def softmax_cross_entropy(logits, target) -> Tensor:
    """Mean cross-entropy over the batch.

    ``target`` is either integer class indices of shape (B,) or a soft
    label matrix of shape (B, K) whose rows sum to one.
    """
    z = _as_tensor(logits)
    if z.data.ndim != 2:
        raise ContractError("softmax_cross_entropy: logits must be (batch, classes)")
    B, K = z.shape
    target = np.asarray(target)
    if target.ndim == 1:
        if target.shape[0] != B or target.min() < 0 or target.max() >= K:
            raise ContractError("softmax_cross_entropy: bad class indices")
        soft = np.eye(K)[target.astype(np.intp)]
    else:
        if target.shape != (B, K):
            raise ContractError(f"softmax_cross_entropy: target shape {target.shape} != {(B, K)}")
        soft = target.astype(np.float64)
    _check_nan("softmax_cross_entropy", z.data, soft)
    shifted = z.data - z.data.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logsum
    loss = -(soft * logp).sum() / B
    p = np.exp(logp)

    def backward(g):
        return (g * (p * soft.sum(axis=1, keepdims=True) - soft) / B,)

    return custom_op("softmax_cross_entropy", np.array(loss), (z,), backward)


def minmax_scale(x) -> Tensor:
    """Scale each slice over the last two axes to [0, 1].

    Constant slices map to zeros.  The gradient follows the active
    min/max elements (first occurrence on ties).
    """
    x = _as_tensor(x)
    if x.data.ndim < 2:
        raise ContractError("minmax_scale: need at least 2 dims")
    _check_nan("minmax_scale", x.data)
    lead = x.shape[:-2]
    flat = x.data.reshape(lead + (-1,))
    imin = flat.argmin(axis=-1)[..., None]
    imax = flat.argmax(axis=-1)[..., None]
    lo = np.take_along_axis(flat, imin, axis=-1)
    hi = np.take_along_axis(flat, imax, axis=-1)
    span = hi - lo
    const = span == 0
    safe = np.where(const, 1.0, span)
    out = np.where(const, 0.0, (flat - lo) / safe)

    def backward(g):
        gf = g.reshape(flat.shape)
        gx = np.where(const, 0.0, gf / safe)
        # d/dlo and d/dhi of (v - lo) / (hi - lo)
        s_lo = np.where(const, 0.0, ((out - 1.0) * gf).sum(axis=-1, keepdims=True) / safe)
        s_hi = np.where(const, 0.0, (-out * gf).sum(axis=-1, keepdims=True) / safe)
        np.add.at(gx, _flat_index(imin), s_lo.reshape(-1))
        np.add.at(gx, _flat_index(imax), s_hi.reshape(-1))
        return (gx.reshape(x.shape),)

    return custom_op("minmax_scale", out.reshape(x.shape), (x,), backward)


def _flat_index(idx: np.ndarray):
    grids = np.indices(idx.shape[:-1])
    return tuple(g.reshape(-1) for g in grids) + (idx.reshape(-1),)


# -- optimisation -----------------------------------------------------------


class SGDMomentum:
    """Classical momentum: ``v <- m v + g``; ``p <- p - lr v``."""

    def __init__(self, momentum: float = 0.9):
        if not 0.0 <= momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {momentum}")
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}
        self.lr: float | None = None

    def step(self, params: dict[str, Tensor], grads: dict[str, np.ndarray], lr: float,
             lr_scale: dict[str, float] | None = None) -> None:
        # validate everything first so a refused step leaves no partial update
        for name in params:
            g = grads.get(name)
            if g is None:
                continue
            if g.shape != params[name].shape:
                raise ContractError(f"gradient shape {g.shape} != parameter {name!r} {params[name].shape}")
            if not np.isfinite(g).all():
                raise NonFiniteGradientError(name)
        self.lr = lr
        for name, p in params.items():
            g = grads.get(name)
            if g is None:
                continue
            v = self.velocity.get(name)
            v = g.copy() if v is None else self.momentum * v + g
            self.velocity[name] = v
            rate = lr * (lr_scale.get(name, 1.0) if lr_scale else 1.0)
            p.data = p.data - rate * v


def cosine_lr(t_cur: float, period: float, lr_max: float, lr_min: float) -> float:
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + math.cos(math.pi * t_cur / period))


@dataclass(frozen=True)
class CosineWarmRestarts:
    """Cosine annealing with warm restarts over integer step indices."""

    lr_max: float = 0.1
    lr_min: float = 1e-5
    t0: int = 100
    t_mult: float = 2.0

    def __post_init__(self):
        if self.t0 <= 0:
            raise ConfigError(f"t0 must be positive, got {self.t0}")
        if self.t_mult < 1:
            raise ConfigError(f"t_mult must be >= 1, got {self.t_mult}")
        if self.lr_min > self.lr_max:
            raise ConfigError("lr_min exceeds lr_max")

    def cycle(self, t: int) -> tuple[float, float]:
        """Return ``(t_cur, period)`` for step ``t``."""
        if t < 0:
            raise ValueError("step index must be non-negative")
        period, start = float(self.t0), 0.0
        while t >= start + period:
            start += period
            period *= self.t_mult
        return t - start, period

    def __call__(self, t: int) -> float:
        t_cur, period = self.cycle(t)
        return cosine_lr(t_cur, period, self.lr_max, self.lr_min)


# -- gradient checking ------------------------------------------------------


@dataclass
class GradcheckReport:
    errors: dict[str, float]
    tol: float
    analytic: dict[str, np.ndarray] = field(repr=False, default_factory=dict)
    numeric: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(e < self.tol for e in self.errors.values())

    @property
    def worst(self) -> float:
        return max(self.errors.values(), default=0.0)


def finite_diff_gradcheck(loss_fn: Callable[[], Tensor], params: dict[str, Tensor],
                          delta: float = 1e-5, tol: float = 1e-4) -> GradcheckReport:
    """Compare tape gradients against central differences.

    ``loss_fn`` is called with no arguments and must read the current
    values of ``params``.  The relative error per element is
    ``|a - n| / max(|a|, |n|, 1e-12)``; the report keeps the maximum per
    parameter.
    """
    if not delta > 0:
        raise ValueError("delta must be positive")
    for p in params.values():
        p.grad = None
        p.requires_grad = True
    with Tape() as tape:
        loss = loss_fn()
        tape.backward(loss)
    analytic = {n: (p.grad if p.grad is not None else np.zeros(p.shape)).copy() for n, p in params.items()}

    errors, numeric = {}, {}
    for name, p in params.items():
        num = np.zeros(p.shape)
        flat = p.data.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + delta
            up = float(loss_fn().data)
            flat[i] = orig - delta
            down = float(loss_fn().data)
            flat[i] = orig
            num.flat[i] = (up - down) / (2.0 * delta)
        a = analytic[name]
        rel = np.abs(a - num) / np.maximum(np.maximum(np.abs(a), np.abs(num)), 1e-12)
        errors[name] = float(rel.max()) if rel.size else 0.0
        numeric[name] = num
    return GradcheckReport(errors, tol, analytic, numeric)

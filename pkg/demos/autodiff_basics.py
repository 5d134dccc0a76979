"""
Reverse-mode differentiation on numpy arrays
============================================

Everything trainable in relfb runs on a small tape: operations record
themselves while a ``Tape`` is active and ``backward`` replays them.
"""

import numpy as np

from relfb import ndcore as nd
from relfb.ndcore import Tape, Tensor

# A two-layer sigmoid network on four inputs.
rng = np.random.default_rng(0)
x = Tensor(rng.standard_normal((4, 3)))
w1 = Tensor(rng.standard_normal((3, 5)), requires_grad=True, name="w1")
w2 = Tensor(rng.standard_normal((5, 2)), requires_grad=True, name="w2")
labels = np.array([0, 1, 1, 0])


def loss():
    h = nd.sigmoid(nd.matmul(x, w1))
    return nd.softmax_cross_entropy(nd.matmul(h, w2), labels)


with Tape() as tape:
    value = loss()
    tape.backward(value)
print(f"loss {value.item():.4f}, |dL/dw1| {np.abs(w1.grad).max():.4f}")

# The finite-difference checker compares every entry against a central
# difference; the relative error is |a - n| / max(|a|, |n|, 1e-12).
report = nd.finite_diff_gradcheck(loss, {"w1": w1, "w2": w2})
for name, err in report.errors.items():
    print(f"{name}: worst relative error {err:.1e}")

# SGD with momentum under a warm-restart cosine schedule.
sched = nd.CosineWarmRestarts(lr_max=0.1, lr_min=1e-5, t0=20, t_mult=2)
opt = nd.SGDMomentum(0.9)
params = {"w1": w1, "w2": w2}
for t in range(60):
    for p in params.values():
        p.grad = None
    with Tape() as tape:
        value = loss()
        tape.backward(value)
    opt.step(params, {n: p.grad for n, p in params.items()}, sched(t))
    if t in (0, 19, 20, 59):
        print(f"step {t:2d}  lr {sched(t):.5f}  loss {value.item():.4f}")

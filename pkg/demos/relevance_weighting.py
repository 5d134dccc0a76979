"""
Multi-head relevance weighting
==============================

The representation is split along frequency into segments.  Each head
looks at a (2c+1)-frame window around every cell and emits a weight in
(0, 1); the weighted segment is added back to the original (skip-add)
and the segments are spliced into a full representation again.
"""

import numpy as np

from relfb.ndcore import Tensor
from relfb.relevance import RelevanceNet, SplitScheme, context_vector, count_frontend_params, splice, split_bands

rng = np.random.default_rng(0)
x = rng.standard_normal((80, 98))

# Three ways to split 80 bands over heads.
for text in ("40-40", "even-odd", "20-30-30"):
    scheme = SplitScheme.parse(text, 80)
    segs = split_bands(x, scheme)
    print(f"{text:>9}: segment rows {[s.shape[0] for s in segs]}, splice restores x:",
          np.array_equal(splice(segs, scheme), x))

# Context vectors replicate the edge frames.
print("context at frame 0, c=2:", context_vector(np.arange(6.0)[None], 0, 0, 2))

net = RelevanceNet(SplitScheme.parse("40-40", 80), c=10, hidden=50, rng=1)
out, masks = net.forward(Tensor(x))
for i, m in enumerate(masks):
    print(f"head {i}: mask range ({m.data.min():.3f}, {m.data.max():.3f})")
ratio = np.abs(out.data) / np.maximum(np.abs(x), 1e-12)
print(f"skip-add keeps |x| <= |out| <= 2|x|: ratio in [{ratio.min():.3f}, {ratio.max():.3f}]")
print("learnable front-end size, 80 filters + 1 head:", count_frontend_params(80, 1), "parameters")

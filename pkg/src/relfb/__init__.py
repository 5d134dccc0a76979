"""Learnable cosine-Gaussian filterbank with multi-head relevance weighting.

Pure numpy: a small reverse-mode autodiff core (:mod:`relfb.ndcore`), the
filterbank front end, relevance heads, augmentation, a compact CNN back end,
data I/O and a command-line interface.
"""

__version__ = "0.1.0"

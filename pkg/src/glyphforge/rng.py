"""Deterministic RNG derivation shared across the pipeline.

Every stochastic component derives its generator from an explicit user
seed plus a structural key (page index, tree index, ...), so parallel
and serial execution orders produce identical results.
"""

from __future__ import annotations

import numpy as np


def derive_rng(seed: int, *key: int) -> np.random.Generator:
    """Return a Generator for ``(seed, *key)``, independent of call order."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in key]])
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Collapse ``(seed, *key)`` to a single 63-bit integer seed."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(k) for k in key]])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)

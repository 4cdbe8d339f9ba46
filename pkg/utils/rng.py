"""
Reproducible random streams.

Every replicate, excursion block or graph draw gets its own numpy Generator
built from a Philox bit generator keyed by SeedSequence((seed, index)), so a
result depends only on (seed, index) and never on how work is scheduled
across workers.
"""

import numpy as np


def stream(seed: int, index: int = 0, *extra: int) -> np.random.Generator:
    """Generator for the `index`-th task of a run seeded with `seed`."""
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    entropy = (int(seed), int(index)) + tuple(int(e) for e in extra)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

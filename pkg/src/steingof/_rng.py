"""Deterministic random substreams.

Every replicate or repetition gets its own generator derived from
``(seed, *keys)`` so results do not depend on execution order or on how
work is split across processes.
"""

import numpy as np

# stream tags, kept distinct so that e.g. data and bootstrap draws never collide
DATA = 0
WARP = 1
BOOT = 2
NULL_SIM = 3


def substream(seed: int, *keys: int) -> np.random.Generator:
    entropy = [int(seed)] + [int(k) for k in keys]
    if any(k < 0 for k in entropy):
        raise ValueError("seed and stream keys must be non-negative integers")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))

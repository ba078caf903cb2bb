"""Counter-based random substreams.

Every Monte Carlo draw in the simulator comes from a Philox generator keyed
by ``(seed, *keys)``, so any trial chunk can be regenerated in isolation and
results do not depend on how work is split across processes.
"""

import numpy as np


def substream(seed, *keys):
    """Return a Philox generator for the substream ``keys`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng, shape, variance=1.0):
    """Circularly-symmetric complex Gaussian samples, CN(0, variance)."""
    scale = np.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

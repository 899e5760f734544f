"""Reproducible random streams.

All randomness flows through Philox, a 64-bit-keyed counter-based generator:
independent per-trial streams are cheap to derive (key = base seed XOR trial
index) and a stream is fully determined by its key regardless of how many
trials run in parallel.
"""

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Generator for a single stream keyed by ``seed``."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed & (2**64 - 1))))


def trial_rng(base_seed: int, trial: int) -> np.random.Generator:
    """Independent stream for one trial of an experiment."""
    return make_rng((base_seed & (2**64 - 1)) ^ trial)

"""Seeded random streams.

All randomness goes through numpy's ``Generator`` on the PCG64 bit
generator. A master seed fans out to labelled sub-streams so that turning
one randomized component on or off never shifts the draws of another.
"""

import numpy as np

PRNG_NAME = "numpy.PCG64"

# sub-stream labels
FEATURES = 0
COLLECTION = 1
SUBSET = 2
DATA = 3


def generator(seed, *key):
    """Return a PCG64 generator for ``seed`` and sub-stream ``key``."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(seq))


def derive_seed(seed, *key):
    """Derive a 63-bit integer seed for a labelled sub-stream."""
    seq = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return int(seq.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))

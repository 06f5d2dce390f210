"""Counter-based per-replica seeding.

A replica's stream depends only on ``(master_seed, replica_index)``, so results
do not depend on how replicas are scheduled across workers.
"""
import numpy as np

_MASK64 = (1 << 64) - 1


def splitmix64(x):
    """One round of the SplitMix64 finalizer on a 64-bit integer."""
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def replica_seed(master_seed, index):
    """64-bit mix of the master seed and a replica (or stream) index."""
    if index < 0:
        raise ValueError("replica index must be non-negative")
    return splitmix64(splitmix64(master_seed & _MASK64) ^ (index & _MASK64))


def replica_rng(master_seed, index):
    return np.random.Generator(np.random.PCG64(replica_seed(master_seed, index)))


# Reserved stream indices for non-replica randomness (fixed H draws, bootstrap).
# They sit far above any practical replica count.
STREAM_FIXED_H = 1 << 62
STREAM_BOOTSTRAP = (1 << 62) + 1

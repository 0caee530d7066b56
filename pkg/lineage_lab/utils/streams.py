"""Seeded random streams.

Every run derives its generators from one root seed. Replica ``i`` of stream ``s``
uses ``SeedSequence(root_seed, spawn_key=(s, i))``, so replicas are independent,
reproducible bit for bit and safe to run in any order or process.
"""

import numpy as np

from lineage_lab.utils.constants import STREAM_SIMULATION


def replica_generator(root_seed: int, replica: int, stream: int = STREAM_SIMULATION) -> np.random.Generator:
    """Generator for one replica of one stream."""
    if root_seed < 0:
        raise ValueError(f"Seed must be nonnegative, got {root_seed}")
    sequence = np.random.SeedSequence(entropy=int(root_seed), spawn_key=(int(stream), int(replica)))
    return np.random.default_rng(sequence)


def as_generator(rng) -> np.random.Generator:
    """Accept a Generator, an integer seed or None."""
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)

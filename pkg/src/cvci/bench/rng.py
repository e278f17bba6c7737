"""Counter-based random streams keyed by ``(master_seed, *keys)``.

Stream ``(s, r, j)`` is a pure function of its key, so any replicate can be
regenerated in isolation and results never depend on scheduling.
"""

import numpy as np


def seed_sequence(master_seed: int, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(k) for k in keys))


def stream(master_seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_sequence(master_seed, *keys)))


def derived_seed(master_seed: int, *keys: int) -> int:
    """A 32-bit integer seed for APIs that take plain integers (fold plans)."""
    return int(seed_sequence(master_seed, *keys).generate_state(1)[0])

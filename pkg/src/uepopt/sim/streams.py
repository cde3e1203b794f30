"""
Seeded random streams.

Every stochastic operator draws from a Philox counter-based generator keyed
by (seed, feature, stage), so a feature's draws do not depend on how many
other features were simulated before it or in what order.
"""

from enum import IntEnum

import numpy as np

from uepopt.core.errors import DomainError


class Stage(IntEnum):
    """Pipeline stages that consume randomness."""

    NOISE = 0
    PHASE = 1
    FLIPS = 2
    BER_DRAW = 3
    DROPOUT = 4
    FEATURES = 5
    PAYLOAD = 6


def stream(seed: int, feature: int = 0, stage: Stage | int = 0) -> np.random.Generator:
    """Independent generator for one (feature, stage) pair under a seed."""
    if seed < 0:
        raise DomainError(f"seed must be non-negative, got {seed}")
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(feature), int(stage)))
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, *path: int) -> int:
    """A 63-bit child seed for a position in a nested loop (point, trial, ...)."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return int(sequence.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))

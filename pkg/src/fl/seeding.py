"""Master-seed hierarchy.

Every random stream is keyed by (master seed, stream, *keys) through numpy's
``SeedSequence`` spawn keys, so adding or removing a consumer of randomness
never shifts another stream.
"""

from enum import IntEnum

import numpy as np


class Stream(IntEnum):
    """Independent random streams of one experiment."""
    DATA = 1
    PARTITION = 2
    SPLIT = 3
    INIT = 4
    SAMPLE = 5
    CLIENT = 6


def _sequence(master_seed: int, stream: Stream, *keys: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(master_seed, spawn_key=(int(stream), *(int(k) for k in keys)))


def derive_seed(master_seed: int, stream: Stream, *keys: int) -> int:
    """A 32-bit integer seed for ``stream`` at ``keys``."""
    return int(_sequence(master_seed, stream, *keys).generate_state(1, dtype=np.uint32)[0])


def derive_rng(master_seed: int, stream: Stream, *keys: int) -> np.random.Generator:
    """A generator for ``stream`` at ``keys``."""
    return np.random.default_rng(_sequence(master_seed, stream, *keys))

"""Counter-based seed derivation.

Every random stream is keyed by (master seed, run, purpose, index), so adding
a strategy or a task never shifts another stream.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part)
    return zlib.crc32(str(part).encode("utf-8"))


def seed_sequence(master: int, *path) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=int(master), spawn_key=tuple(_key(p) for p in path))


def rng_for(master: int, *path) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(master, *path))


def int_seed(master: int, *path) -> int:
    return int(seed_sequence(master, *path).generate_state(1, dtype=np.uint32)[0])

"""Splittable seed derivation.

A 64-bit master seed becomes the entropy of a :class:`numpy.random.SeedSequence`
whose spawn key is built from the experiment name and the cell coordinates::

    SeedSequence(master, spawn_key=(crc32(experiment), k1, k2, ...))

String keys are hashed with CRC-32, noise levels are stored in millionths and
integers are used as they are. Every cell therefore owns an independent stream
that does not depend on execution order or thread count.
"""

from __future__ import annotations

import zlib

import numpy as np

MAX_MASTER_SEED = 2**64 - 1


def _key(part) -> int:
    if isinstance(part, (bool, np.bool_)):
        return int(part)
    if isinstance(part, (int, np.integer)):
        if part < 0:
            raise ValueError("seed keys must be non-negative")
        return int(part)
    if isinstance(part, (float, np.floating)):
        return int(round(float(part) * 1_000_000))
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    raise TypeError(f"unsupported seed key {part!r}")


def seed_sequence(master: int, experiment: str, *keys) -> np.random.SeedSequence:
    if not 0 <= int(master) <= MAX_MASTER_SEED:
        raise ValueError("master seed must fit in 64 bits")
    return np.random.SeedSequence(int(master), spawn_key=(_key(experiment),) + tuple(_key(k) for k in keys))


def rng_for(master: int, experiment: str, *keys) -> np.random.Generator:
    """Generator for one experiment cell, e.g. ``rng_for(7, "coefficients", "sea", 4, 0)``."""
    return np.random.default_rng(seed_sequence(master, experiment, *keys))

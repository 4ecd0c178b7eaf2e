"""Deterministic named sub-streams of randomness.

All randomness in the package flows from one master seed through
`np.random.SeedSequence` spawn keys, so every task (a CV fold, a bootstrap
replicate, a split) gets an independent stream that does not depend on
scheduling, thread count, or how many sibling tasks exist.  String key
parts are folded to integers with CRC-32, which is stable across platforms
and Python versions.
"""

from __future__ import annotations

import zlib

import numpy as np


def _encode_part(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    value = int(part)
    if value < 0:
        raise ValueError(f"seed key parts must be non-negative, got {part!r}")
    return value


def seed_sequence(master_seed: int, *parts) -> np.random.SeedSequence:
    """SeedSequence for the sub-stream named by `parts` under `master_seed`."""
    key = tuple(_encode_part(p) for p in parts)
    return np.random.SeedSequence(master_seed, spawn_key=key)


def generator(master_seed: int, *parts) -> np.random.Generator:
    """A fresh PCG64 generator for the named sub-stream."""
    return np.random.Generator(np.random.PCG64(seed_sequence(master_seed, *parts)))


def subseed(master_seed: int, *parts) -> int:
    """A stable integer seed derived from the named sub-stream.

    Useful when an API takes an int seed rather than a generator.
    """
    state = seed_sequence(master_seed, *parts).generate_state(2, dtype=np.uint32)
    return int(state[0]) << 32 | int(state[1])

"""Seeded random streams.

All randomness goes through :func:`stream`, which maps an integer seed and a
purpose name to an independent PCG64 generator.  The mapping is

    SeedSequence(entropy=seed, spawn_key=(PURPOSES[purpose], *extra))

so that the data, center and fold draws of one experiment never share state,
and repetition ``r`` of a benchmark can be given its own sub-stream via
``extra=(r,)``.  Both PCG64 and SeedSequence are specified bit-for-bit by
numpy, so runs replay identically across platforms.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {
    "data": 0,
    "centers": 1,
    "folds": 2,
    "test": 3,
    "bench": 4,
    "shuffle": 5,
}


def stream(seed: int, purpose: str, *extra: int) -> np.random.Generator:
    """Return the generator for ``purpose`` under ``seed``."""
    try:
        key = PURPOSES[purpose]
    except KeyError:
        raise ValueError(f"unknown stream purpose {purpose!r}") from None
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(key, *map(int, extra)))
    return np.random.Generator(np.random.PCG64(ss))


def sub_seed(seed: int, *key: int) -> int:
    """A 63-bit integer seed derived from ``seed`` and ``key``.

    Used to give each benchmark repetition its own top-level seed, which is
    then split by purpose through :func:`stream`.
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(PURPOSES["bench"], *map(int, key)))
    return int(ss.generate_state(2, np.uint64)[0] >> np.uint64(1))

"""Reproducible random streams.

Streams are built on the counter-based Philox-4x64 bit generator keyed
through ``numpy.random.SeedSequence(seed, spawn_key=(stream_id,))``, so a
(seed, stream_id) pair names a stream deterministically: identical inputs
give bit-identical draws on every platform, and distinct stream ids give
statistically independent streams.
"""

import os

import numpy as np

__all__ = ["stream_rng", "default_seed", "SEED_ENV_VAR"]

SEED_ENV_VAR = "ELLIPSYM_SEED"
FALLBACK_SEED = 20240717


def default_seed():
    """Default seed: the ELLIPSYM_SEED environment variable, else a fixed value."""
    raw = os.environ.get(SEED_ENV_VAR)
    if raw is None:
        return FALLBACK_SEED
    return int(raw)


def stream_rng(seed, stream_id=0):
    """Generator for the named stream (seed, stream_id)."""
    if seed is None:
        seed = default_seed()
    seq = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(seq))

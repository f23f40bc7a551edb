"""Seed-stream derivation.

All randomness goes through numpy's default PCG64 generator. Logically
distinct random purposes (control initialization, reference draws, metric
draws, tour start) get independent streams derived from (seed, tag) so that
changing the sample count of one purpose never shifts the draws of another.
"""

from __future__ import annotations

import numpy as np

STREAM_INIT_CONTROLS = 1
STREAM_REFERENCE = 2
STREAM_METRIC = 3
STREAM_TOUR = 4


def rng_stream(seed: int, tag: int) -> np.random.Generator:
    """Generator for the (seed, tag) stream."""
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(tag)]))

import numpy as np
import pytest

from flowcover.seeding import (
    STREAM_INIT_CONTROLS,
    STREAM_METRIC,
    STREAM_REFERENCE,
    STREAM_TOUR,
    rng_stream,
)


def test_same_arguments_same_stream():
    a = rng_stream(7, STREAM_METRIC).random(16)
    b = rng_stream(7, STREAM_METRIC).random(16)
    assert np.array_equal(a, b)


def test_tags_are_disjoint():
    tags = [STREAM_INIT_CONTROLS, STREAM_REFERENCE, STREAM_METRIC, STREAM_TOUR]
    assert len(set(tags)) == 4
    draws = [rng_stream(0, t).random(8) for t in tags]
    for i in range(len(draws)):
        for j in range(i + 1, len(draws)):
            assert not np.array_equal(draws[i], draws[j])


def test_different_seeds_differ():
    assert not np.array_equal(
        rng_stream(1, STREAM_METRIC).random(8),
        rng_stream(2, STREAM_METRIC).random(8),
    )


def test_matches_seed_list_convention():
    # Callers outside the planner can reproduce a stream by passing the
    # [seed, tag] pair straight to default_rng; sample() relies on this.
    a = rng_stream(42, STREAM_REFERENCE).random(8)
    b = np.random.default_rng([42, STREAM_REFERENCE]).random(8)
    assert np.array_equal(a, b)


def test_negative_seed_rejected():
    with pytest.raises(ValueError, match="nonnegative"):
        rng_stream(-1, STREAM_METRIC)

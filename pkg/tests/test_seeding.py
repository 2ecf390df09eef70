"""Named random substreams off a single root seed."""

import numpy as np

from ardistill.seeding import KNOWN_STREAMS, Stream, StreamSet, stream_rng


def test_known_stream_names_are_present():
    for name in ("world", "rollout", "critic-noise", "projections", "bootstrap",
                 "init-generator", "init-critic", "sample-noise"):
        assert name in KNOWN_STREAMS


def test_same_seed_and_name_reproduce_draws():
    a = Stream(11, "world").standard_normal((4, 3))
    b = Stream(11, "world").standard_normal((4, 3))
    assert np.array_equal(a, b)


def test_different_names_give_independent_draws():
    a = Stream(11, "world").standard_normal(8)
    b = Stream(11, "rollout").standard_normal(8)
    assert not np.array_equal(a, b)


def test_different_root_seeds_give_different_draws():
    a = Stream(0, "world").standard_normal(8)
    b = Stream(1, "world").standard_normal(8)
    assert not np.array_equal(a, b)


def test_stream_counts_every_draw_call():
    s = Stream(5, "rollout")
    s.standard_normal(3)
    s.integers(0, 10, size=2)
    s.uniform(size=4)
    s.choice(6, size=2)
    assert s.draws == 4


def test_stream_set_caches_streams_and_reports_counts():
    ss = StreamSet(9)
    first = ss.get("world")
    first.standard_normal(2)
    assert ss.get("world") is first
    ss.get("bootstrap").integers(0, 4)
    assert ss.draw_counts() == {"bootstrap": 1, "world": 1}


def test_stream_rng_matches_stream_generator():
    a = stream_rng(42, "sample-noise").standard_normal(6)
    b = Stream(42, "sample-noise").standard_normal(6)
    assert np.array_equal(a, b)


def test_consuming_one_stream_leaves_others_untouched():
    ss = StreamSet(3)
    ss.get("world").standard_normal(100)
    later = ss.get("rollout").standard_normal(5)
    fresh = Stream(3, "rollout").standard_normal(5)
    assert np.array_equal(later, fresh)

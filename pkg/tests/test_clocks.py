import numpy as np
import pytest

from asepmix.clocks import RATE_1, RATE_Q, ClockStream, gen_clocks
from asepmix.configs import Interval
from asepmix.errors import InvalidInputError


def test_rate_q_stream_empty_at_q0():
    cs = gen_clocks(Interval(-3, 3), 0.0, 50.0, seed=1)
    assert cs.rate_q_count() == 0
    assert all(len(cs.times[x]) > 0 for x in cs.edges.sites())


def test_mean_counts():
    # rate-1 marks on one edge have mean T; rate-q marks mean qT
    T, q = 30.0, 0.5
    reps = 3000
    ones = []
    qs = []
    for seed in range(reps):
        cs = gen_clocks(Interval(0, 0), q, T, seed=seed)
        tags = cs.tags[0]
        ones.append(int((tags == RATE_1).sum()))
        qs.append(int((tags == RATE_Q).sum()))
    for vals, mean in ((ones, T), (qs, q * T)):
        se = np.std(vals) / np.sqrt(reps)
        assert abs(np.mean(vals) - mean) < 4 * se + 1e-9


def test_determinism_and_independence():
    a = gen_clocks(Interval(-2, 4), 0.25, 20.0, seed=7)
    b = gen_clocks(Interval(-2, 4), 0.25, 20.0, seed=7)
    for x in a.edges.sites():
        assert np.array_equal(a.times[x], b.times[x])
        assert np.array_equal(a.tags[x], b.tags[x])
    c = gen_clocks(Interval(-2, 4), 0.25, 20.0, seed=8)
    assert not all(np.array_equal(a.times[x], c.times[x]) for x in a.edges.sites())


def test_window_extension_preserves_streams():
    small = gen_clocks(Interval(-2, 2), 0.5, 15.0, seed=3)
    big = gen_clocks(Interval(-10, 10), 0.5, 15.0, seed=3)
    for x in small.edges.sites():
        assert np.array_equal(small.times[x], big.times[x])
        assert np.array_equal(small.tags[x], big.tags[x])


def test_times_strictly_increasing_and_merged_order():
    cs = gen_clocks(Interval(-5, 5), 0.75, 40.0, seed=12)
    for x in cs.edges.sites():
        assert np.all(np.diff(cs.times[x]) > 0)
    merged = cs.merged()
    assert merged == sorted(merged, key=lambda e: (e[0], e[1]))


def test_validation():
    with pytest.raises(InvalidInputError):
        gen_clocks(Interval(0, 1), 1.0, 10.0, seed=0)
    with pytest.raises(InvalidInputError):
        gen_clocks(Interval(0, 1), 0.5, 0.0, seed=0)
    cs = gen_clocks(Interval(0, 1), 0.5, 1.0, seed=0)
    with pytest.raises(InvalidInputError):
        cs.events_for(99)

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asepmix.configs import (
    FINITE_BOUNDARY,
    BinaryConfig,
    BoundaryMode,
    Fill,
    HeightFunction,
    Interval,
    Permutation,
    config_from_text,
    config_to_text,
    energy_config,
    energy_perm,
    height,
    height_prime,
    is_dominated,
    perm_from_text,
    perm_to_text,
    project_threshold,
    recover_from_projections,
)
from asepmix.errors import InvalidInputError


def test_energy_perm_examples():
    iv = Interval(1, 3)
    assert energy_perm(Permutation.identity(iv)) == 3
    assert energy_perm(Permutation.reversal(iv)) == 0
    assert energy_perm(Permutation.from_one_line([2, 1, 3])) == 2


def test_energy_extremes():
    iv = Interval(2, 6)
    n = iv.size
    assert energy_perm(Permutation.identity(iv)) == n * (n - 1) // 2
    assert energy_perm(Permutation.reversal(iv)) == 0


def test_energy_config_examples():
    assert energy_config(BinaryConfig(Interval(1, 4), (0, 0, 1, 1))) == 0
    assert energy_config(BinaryConfig(Interval(1, 2), (1, 0))) == 1
    assert energy_config(BinaryConfig(Interval(1, 4), (1, 0, 1, 0))) == 3


def test_energy_config_brute_force_cross_check():
    import itertools
    import random

    rng = random.Random(7)
    for _ in range(40):
        n = rng.randint(1, 20)
        bits = tuple(rng.randint(0, 1) for _ in range(n))
        cfg = BinaryConfig(Interval(1, n), bits)
        brute = sum(
            1
            for i, j in itertools.combinations(range(n), 2)
            if bits[i] == 1 and bits[j] == 0
        )
        assert energy_config(cfg) == brute


def test_project_threshold_examples():
    iv = Interval(1, 4)
    assert project_threshold(Permutation.identity(iv), 2).bits == (1, 1, 0, 0)
    assert project_threshold(Permutation.reversal(iv), 2).bits == (0, 0, 1, 1)
    assert project_threshold(Permutation.from_one_line([3, 1, 4, 2]), 2).bits == (0, 1, 0, 1)
    assert project_threshold(Permutation.identity(iv), 2).boundary == FINITE_BOUNDARY


def test_recover_round_trip_exhaustive():
    import itertools

    iv = Interval(1, 5)
    for vals in itertools.permutations(iv.sites()):
        w = Permutation(iv, vals)
        projs = {k: project_threshold(w, k) for k in iv.sites()}
        assert recover_from_projections(projs) == w


def test_recover_rejects_non_monotone_family():
    iv = Interval(1, 2)
    bad = {
        1: BinaryConfig(iv, (1, 0)),
        2: BinaryConfig(iv, (1, 1)),
    }
    # make projection at 1 not pointwise <= projection at 2 by count corruption
    worse = {
        1: BinaryConfig(iv, (0, 1)),
        2: BinaryConfig(iv, (1, 1)),
    }
    assert recover_from_projections(bad).values == (1, 2)
    assert recover_from_projections(worse).values == (2, 1)
    with pytest.raises(InvalidInputError):
        recover_from_projections({1: BinaryConfig(iv, (1, 1)), 2: BinaryConfig(iv, (1, 1))})


def test_height_examples():
    # ground state with k particles: h(N-k) = N-k is the pointwise max
    N, k = 6, 2
    iv = Interval(1, N)
    bits = tuple(1 if x >= N - k + 1 else 0 for x in iv.sites())
    h = height(BinaryConfig(iv, bits))
    assert h(N - k) == N - k
    assert all(h(x) <= h(N - k) + abs(x - (N - k)) for x in range(-3, N + 4))

    h2 = height(BinaryConfig(Interval(1, 2), (1, 0)))
    assert (h2(0), h2(1), h2(2)) == (0, -1, 0)

    # step on a Z-window: 1[x <= 0] with filled left tail, empty right tail
    w = Interval(-5, 5)
    step = BinaryConfig(
        w, tuple(1 if x <= 0 else 0 for x in w.sites()), BoundaryMode(Fill.ONES, Fill.ZEROS)
    )
    h3 = height(step)
    assert all(h3(x) == abs(x) for x in range(-8, 9))


def test_height_prime_examples():
    iv = Interval(1, 2)
    allones = BinaryConfig(iv, (1, 1))
    hp = height_prime(allones)
    assert all(hp(x) == -x for x in range(-3, 3))
    # differs from height only in the left asymptotics
    cfg = BinaryConfig(Interval(1, 4), (0, 1, 1, 0))
    h, hp = height(cfg), height_prime(cfg)
    assert h(0) == 0 and hp(0) == 0
    assert h(-3) == -3 and hp(-3) == 3


def test_is_dominated():
    cfg1 = BinaryConfig(Interval(1, 2), (1, 0))
    cfg2 = BinaryConfig(Interval(1, 2), (0, 1))
    h1, h2 = height(cfg1), height(cfg2)
    w = Interval(0, 3)
    assert is_dominated(h1, h1, w)
    assert is_dominated(h1, h2, w)
    assert not is_dominated(h2, h1, w)


def test_height_function_validation():
    with pytest.raises(InvalidInputError):
        HeightFunction(0, 0, (1, 2), 1, 1)
    with pytest.raises(InvalidInputError):
        HeightFunction(0, 0, (1, -1), 0, 1)


@given(st.integers(-5, 5), st.lists(st.sampled_from([0, 1]), min_size=1, max_size=20))
@settings(max_examples=60, deadline=None)
def test_height_increment_rule(m, bits):
    cfg = BinaryConfig(Interval(m, m + len(bits) - 1), tuple(bits))
    h = height(cfg)
    for x in cfg.interval.sites():
        assert h(x) - h(x - 1) == 1 - 2 * cfg(x)
    # unit steps outside too
    for x in range(m - 4, m + len(bits) + 4):
        assert abs(h(x) - h(x - 1)) == 1


@given(st.permutations(list(range(1, 7))))
@settings(max_examples=60, deadline=None)
def test_energy_plus_inversions(vals):
    w = Permutation.from_one_line(vals)
    n = len(vals)
    inversions = sum(
        1 for i in range(n) for j in range(i + 1, n) if vals[i] > vals[j]
    )
    assert energy_perm(w) + inversions == n * (n - 1) // 2


@given(st.permutations(list(range(1, 7))), st.integers(1, 6), st.integers(1, 6))
@settings(max_examples=60, deadline=None)
def test_projection_monotone(vals, k1, k2):
    w = Permutation.from_one_line(vals)
    lo, hi = min(k1, k2), max(k1, k2)
    a, b = project_threshold(w, lo), project_threshold(w, hi)
    assert all(x <= y for x, y in zip(a.bits, b.bits))


def test_text_round_trips():
    w = Permutation.from_one_line([3, 1, 4, 2])
    assert perm_from_text(perm_to_text(w)) == w
    cfg = BinaryConfig(Interval(-2, 1), (1, 0, 1, 1), BoundaryMode(Fill.ONES, Fill.ZEROS))
    assert config_from_text(config_to_text(cfg)) == cfg
    with pytest.raises(InvalidInputError):
        perm_from_text("3,cat,1")


def test_permutation_validation_and_inverse():
    with pytest.raises(InvalidInputError):
        Permutation(Interval(1, 3), (1, 1, 2))
    w = Permutation.from_one_line([2, 3, 1])
    assert w.inverse().values == (3, 1, 2)
    assert w.inverse().inverse() is w

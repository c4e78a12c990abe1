import random
from fractions import Fraction

import pytest

from asepmix.configs import BinaryConfig, Interval, Permutation, energy_config, project_threshold
from asepmix.errors import InvalidInputError, UnsupportedSizeError
from asepmix.mallows import (
    MallowsMeasure,
    ProjectedMeasure,
    check_energy_tail,
    energy_distribution,
    enumerate_permutations,
    mallows_prob,
    partition_Z,
    projected_prob,
    q_binomial,
    q_binomial_coeffs,
    sample_mallows,
    sample_mallows_batch,
    sample_projected,
)

Q = Fraction(1, 2)


def test_partition_examples():
    assert partition_Z(1, 1, Q) == 1
    assert partition_Z(1, 2, Q) == 1 / (1 + Q)
    assert partition_Z(1, 3, Q) == 1 / ((1 + Q) * (1 + Q + Q**2))
    with pytest.raises(InvalidInputError):
        partition_Z(1, 3, Fraction(3, 2))


def test_partition_matches_enumeration():
    for n in (2, 3, 4, 5):
        iv = Interval(1, n)
        total = sum(Q ** sum(1 for i in range(n) for j in range(i + 1, n) if w.values[i] < w.values[j])
                    for w in enumerate_permutations(iv))
        assert partition_Z(1, n, Q) == 1 / total


def test_q_binomial_examples():
    assert q_binomial(5, 0, Q) == 1
    assert q_binomial(2, 1, Q) == 1 + Q
    assert q_binomial(4, 2, Q) == 1 + Q + 2 * Q**2 + Q**3 + Q**4
    for n in range(8):
        for k in range(n + 1):
            assert q_binomial(n, k, Q) == q_binomial(n, n - k, Q)


def test_q_binomial_counts_configs():
    import itertools

    n, k = 6, 3
    total = Fraction(0)
    for ones in itertools.combinations(range(n), k):
        bits = tuple(1 if i in ones else 0 for i in range(n))
        total += Q ** energy_config(BinaryConfig(Interval(1, n), bits))
    assert total == q_binomial(n, k, Q)
    coeffs = q_binomial_coeffs(n, k)
    assert sum(c * Q**a for a, c in enumerate(coeffs)) == total


def test_mallows_prob_examples():
    iv2 = Interval(1, 2)
    m2 = MallowsMeasure(iv2, Q)
    assert mallows_prob(m2, Permutation.reversal(iv2)) == 1 / (1 + Q)
    assert mallows_prob(m2, Permutation.identity(iv2)) == Q / (1 + Q)
    iv3 = Interval(1, 3)
    m3 = MallowsMeasure(iv3, Q)
    assert mallows_prob(m3, Permutation.identity(iv3)) == Q**3 / ((1 + Q) * (1 + Q + Q**2))
    with pytest.raises(InvalidInputError):
        mallows_prob(m2, Permutation.identity(iv3))


def test_probabilities_sum_to_one_exactly():
    for n in (2, 3, 4, 5, 6):
        iv = Interval(1, n)
        m = MallowsMeasure(iv, Fraction(3, 4))
        assert sum(mallows_prob(m, w) for w in enumerate_permutations(iv)) == 1


def test_projected_prob_examples():
    iv = Interval(1, 2)
    pm = ProjectedMeasure(iv, 1, Q)
    assert projected_prob(pm, BinaryConfig(iv, (0, 1))) == 1 / (1 + Q)
    assert projected_prob(pm, BinaryConfig(iv, (1, 0))) == Q / (1 + Q)
    assert projected_prob(pm, BinaryConfig(iv, (1, 1))) == 0


def test_projection_consistency_exact():
    """Pushforward of the permutation law under projection equals the
    projected law, for every size <= 6 and every particle count."""
    import itertools
    from collections import defaultdict

    for n in (2, 3, 4, 5, 6):
        iv = Interval(1, n)
        m = MallowsMeasure(iv, Q)
        for k in range(n + 1):
            pm = ProjectedMeasure(iv, k, Q)
            push: dict = defaultdict(Fraction)
            for w in enumerate_permutations(iv):
                push[project_threshold(w, pm.threshold).bits] += mallows_prob(m, w)
            for ones in itertools.combinations(range(n), k):
                bits = tuple(1 if i in ones else 0 for i in range(n))
                assert push[bits] == projected_prob(pm, BinaryConfig(iv, bits))


def test_sampler_q0_is_reversal():
    rng = random.Random(0)
    m = MallowsMeasure(Interval(1, 5), Fraction(0))
    for _ in range(10):
        assert sample_mallows(m, rng) == Permutation.reversal(Interval(1, 5))


def test_sampler_determinism():
    m = MallowsMeasure(Interval(1, 6), Q)
    a = sample_mallows(m, random.Random(42))
    b = sample_mallows(m, random.Random(42))
    assert a == b


def test_sampler_tv_small():
    # routine-scale version of the fidelity criterion: S_4, 2e5 samples
    iv = Interval(1, 4)
    m = MallowsMeasure(iv, Q)
    rng = random.Random(11)
    counts: dict = {}
    n_samples = 200_000
    for w in sample_mallows_batch(m, n_samples, rng):
        counts[w.values] = counts.get(w.values, 0) + 1
    tv = sum(
        abs(counts.get(w.values, 0) / n_samples - float(mallows_prob(m, w)))
        for w in enumerate_permutations(iv)
    ) / 2
    assert tv < 0.02


def test_sampler_batch_approximate_matches_law():
    iv = Interval(1, 4)
    m = MallowsMeasure(iv, Q)
    rng = random.Random(5)
    counts: dict = {}
    n_samples = 100_000
    for w in sample_mallows_batch(m, n_samples, rng, approximate=True):
        counts[w.values] = counts.get(w.values, 0) + 1
    tv = sum(
        abs(counts.get(w.values, 0) / n_samples - float(mallows_prob(m, w)))
        for w in enumerate_permutations(iv)
    ) / 2
    assert tv < 0.03


def test_sample_projected_examples_and_law():
    iv = Interval(1, 4)
    rng = random.Random(3)
    assert sample_projected(ProjectedMeasure(iv, 0, Q), rng).bits == (0, 0, 0, 0)
    assert sample_projected(ProjectedMeasure(iv, 4, Q), rng).bits == (1, 1, 1, 1)
    pm = ProjectedMeasure(iv, 2, Q)
    counts: dict = {}
    n_samples = 100_000
    for _ in range(n_samples):
        cfg = sample_projected(pm, rng)
        assert cfg.particle_count == 2
        counts[cfg.bits] = counts.get(cfg.bits, 0) + 1
    import itertools

    tv = 0.0
    for ones in itertools.combinations(range(4), 2):
        bits = tuple(1 if i in ones else 0 for i in range(4))
        tv += abs(counts.get(bits, 0) / n_samples - float(projected_prob(pm, BinaryConfig(iv, bits))))
    assert tv / 2 < 0.02


def test_energy_distribution_examples():
    pm = ProjectedMeasure(Interval(1, 2), 1, Q)
    assert energy_distribution(pm) == {0: 1 / (1 + Q), 1: Q / (1 + Q)}
    pm2 = ProjectedMeasure(Interval(1, 20), 10, Q)
    dist = energy_distribution(pm2)
    assert sum(dist.values()) == 1
    with pytest.raises(UnsupportedSizeError):
        energy_distribution(ProjectedMeasure(Interval(1, 300), 10, Q))


def test_energy_distribution_matches_enumeration():
    import itertools

    n, k = 8, 3
    pm = ProjectedMeasure(Interval(1, n), k, Q)
    dist = energy_distribution(pm)
    brute: dict = {}
    for ones in itertools.combinations(range(n), k):
        bits = tuple(1 if i in ones else 0 for i in range(n))
        a = energy_config(BinaryConfig(Interval(1, n), bits))
        brute[a] = brute.get(a, Fraction(0)) + projected_prob(pm, BinaryConfig(Interval(1, n), bits))
    assert dist == brute


def test_energy_tail_bound_exact():
    # exact verification of the tail estimate across all (k, a) for n <= 12
    for n in (6, 12):
        for k in range(n + 1):
            assert check_energy_tail(ProjectedMeasure(Interval(1, n), k, Q))
    # and at another q
    assert check_energy_tail(ProjectedMeasure(Interval(1, 10), 5, Fraction(3, 4)))

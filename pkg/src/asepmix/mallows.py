"""Exact Mallows measures, projected measures, and samplers.

All probabilities are exact rationals when q is rational.  The measure on
permutations of [[m, n]] weights w by q^kappa(w), kappa counting increasing
pairs, so the reversal is the ground state and the identity carries the
maximal energy (size choose 2).  Samplers draw from the exact law using
integer arithmetic; vectorized float paths must be requested explicitly with
``approximate=True``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

import numpy as np

from asepmix.configs import (
    FINITE_BOUNDARY,
    BinaryConfig,
    Interval,
    Permutation,
    energy_config,
    energy_perm,
)
from asepmix.errors import InvalidInputError, UnsupportedSizeError

_MAX_DP_SIZE = 200


def _check_q(q: Fraction) -> Fraction:
    q = Fraction(q)
    if not 0 <= q < 1:
        raise InvalidInputError(f"q must lie in [0, 1), got {q}")
    return q


@dataclass(frozen=True)
class MallowsMeasure:
    interval: Interval
    q: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", _check_q(self.q))


@dataclass(frozen=True)
class ProjectedMeasure:
    """Law of the k-particle projection of the Mallows measure."""

    interval: Interval
    k: int
    q: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "q", _check_q(self.q))
        if not 0 <= self.k <= self.interval.size:
            raise InvalidInputError(f"particle count {self.k} outside [0, {self.interval.size}]")

    @property
    def threshold(self) -> int:
        """Value threshold realizing this projection from the permutation law."""
        return self.interval.m + self.k - 1


def partition_Z(m: int, n: int, q: Fraction) -> Fraction:
    """Normalizer: 1 / sum_w q^kappa(w) = prod_{i=1}^{n-m+1} (1-q)/(1-q^i)."""
    q = _check_q(q)
    if m > n:
        raise InvalidInputError("m must be <= n")
    z = Fraction(1)
    for i in range(1, n - m + 2):
        z *= (1 - q) / (1 - q**i)
    return z


def q_binomial(n: int, k: int, q: Fraction) -> Fraction:
    """sum over k-particle configurations on n sites of q^kappa(omega)."""
    if not 0 <= k <= n:
        raise InvalidInputError(f"need 0 <= k <= n, got k={k}, n={n}")
    q = Fraction(q)
    num = Fraction(1)
    den = Fraction(1)
    for i in range(1, k + 1):
        num *= 1 - q ** (n - k + i)
        den *= 1 - q**i
    return num / den


def q_binomial_coeffs(n: int, k: int) -> list[int]:
    """Integer coefficients c_a with sum_a c_a z^a = the Gaussian binomial.

    c_a counts k-particle configurations on n sites with energy a.  Built by
    the one-site-at-a-time recursion; O(n^2 k) integer additions.
    """
    if not 0 <= k <= n:
        raise InvalidInputError(f"need 0 <= k <= n, got k={k}, n={n}")
    # row[j] = coefficient list for j particles on the sites placed so far
    rows: list[list[int]] = [[1]] + [[] for _ in range(k)]
    for _ in range(n):
        new_rows = [rows[0]]
        for j in range(1, k + 1):
            if not rows[j] and not rows[j - 1]:
                new_rows.append([])
                continue
            # new rightmost site: hole shifts energy by j, particle keeps it
            shifted = [0] * j + rows[j] if rows[j] else []
            base = rows[j - 1]
            width = max(len(shifted), len(base))
            merged = [0] * width
            for a, c in enumerate(shifted):
                merged[a] += c
            for a, c in enumerate(base):
                merged[a] += c
            new_rows.append(merged)
        rows = new_rows
    return rows[k] if rows[k] else [1]


def mallows_prob(measure: MallowsMeasure, w: Permutation) -> Fraction:
    if w.interval != measure.interval:
        raise InvalidInputError("permutation not on the measure's interval")
    iv = measure.interval
    return measure.q ** energy_perm(w) * partition_Z(iv.m, iv.n, measure.q)


def projected_prob(measure: ProjectedMeasure, omega: BinaryConfig) -> Fraction:
    if omega.interval != measure.interval:
        raise InvalidInputError("configuration not on the measure's interval")
    if omega.particle_count != measure.k:
        return Fraction(0)
    return measure.q ** energy_config(omega) / q_binomial(
        measure.interval.size, measure.k, measure.q
    )


# ---------------------------------------------------------------------------
# Samplers
# ---------------------------------------------------------------------------


def _insertion_weights(q: Fraction, max_len: int) -> list[list[int]]:
    """Integer insertion weights; weights[l][j] proportional to q^j for j<=l."""
    a, b = q.numerator, q.denominator
    tables = []
    for length in range(max_len + 1):
        tables.append([a**j * b ** (length - j) for j in range(length + 1)])
    return tables


def sample_mallows(measure: MallowsMeasure, rng: random.Random) -> Permutation:
    """Exact draw by sequential insertion.

    Values m, m+1, ... are inserted left to right into a growing list; the
    current largest value lands at position j (from the left) with
    probability proportional to q^j, which adds exactly j increasing pairs.
    """
    iv = measure.interval
    tables = _insertion_weights(measure.q, iv.size - 1)
    vals: list[int] = []
    for v in iv.sites():
        weights = tables[len(vals)]
        r = rng.randrange(sum(weights))
        acc = 0
        for j, wgt in enumerate(weights):
            acc += wgt
            if r < acc:
                vals.insert(j, v)
                break
    return Permutation(iv, tuple(vals))


def sample_mallows_batch(
    measure: MallowsMeasure,
    n_samples: int,
    rng: random.Random,
    approximate: bool = False,
) -> list[Permutation]:
    """Many draws; ``approximate=True`` draws the insertion positions from
    float64 truncated-geometric tables (error ~1e-16 per step) instead of
    exact integer arithmetic."""
    iv = measure.interval
    if not approximate:
        return [sample_mallows(measure, rng) for _ in range(n_samples)]
    qf = float(measure.q)
    npr = np.random.default_rng(rng.getrandbits(64))
    size = iv.size
    cdfs = []
    for length in range(size):
        w = np.power(qf, np.arange(length + 1))
        cdfs.append(np.cumsum(w) / w.sum())
    pos = np.empty((n_samples, size), dtype=np.int64)
    for step in range(size):
        pos[:, step] = np.searchsorted(cdfs[step], npr.random(n_samples), side="right")
    out = []
    sites = list(iv.sites())
    for row in pos:
        vals: list[int] = []
        for step, v in enumerate(sites):
            vals.insert(int(row[step]), v)
        out.append(Permutation(iv, tuple(vals)))
    return out


def sample_projected(measure: ProjectedMeasure, rng: random.Random) -> BinaryConfig:
    """Exact draw of the k-particle projected law, site by site from the left."""
    iv = measure.interval
    q = measure.q
    bits: list[int] = []
    sites_left = iv.size
    k_left = measure.k
    for _ in range(iv.size):
        if k_left == 0:
            bits.append(0)
            sites_left -= 1
            continue
        if k_left == sites_left:
            bits.append(1)
            sites_left -= 1
            k_left -= 1
            continue
        p_particle = (
            q ** (sites_left - k_left)
            * q_binomial(sites_left - 1, k_left - 1, q)
            / q_binomial(sites_left, k_left, q)
        )
        r = rng.randrange(p_particle.denominator)
        if r < p_particle.numerator:
            bits.append(1)
            k_left -= 1
        else:
            bits.append(0)
        sites_left -= 1
    return BinaryConfig(iv, tuple(bits), FINITE_BOUNDARY)


# ---------------------------------------------------------------------------
# Energy distribution and the tail bound
# ---------------------------------------------------------------------------


def energy_distribution(measure: ProjectedMeasure) -> dict[int, Fraction]:
    """Exact law of the energy under the projected measure, via the
    Gaussian-binomial coefficient recursion."""
    size = measure.interval.size
    if size > _MAX_DP_SIZE:
        raise UnsupportedSizeError(f"interval size {size} exceeds DP cap {_MAX_DP_SIZE}")
    coeffs = q_binomial_coeffs(size, measure.k)
    total = q_binomial(size, measure.k, measure.q)
    return {a: c * measure.q**a / total for a, c in enumerate(coeffs) if c}


class SqrtQNumber:
    """Exact element a + b*sqrt(q) of the quadratic field Q(sqrt(q))."""

    __slots__ = ("a", "b", "q")

    def __init__(self, a: Fraction, b: Fraction, q: Fraction):
        self.a = Fraction(a)
        self.b = Fraction(b)
        self.q = Fraction(q)

    def _wrap(self, a: Fraction, b: Fraction) -> "SqrtQNumber":
        return SqrtQNumber(a, b, self.q)

    def __mul__(self, other: "SqrtQNumber") -> "SqrtQNumber":
        return self._wrap(
            self.a * other.a + self.b * other.b * self.q,
            self.a * other.b + self.b * other.a,
        )

    def __sub__(self, other: "SqrtQNumber") -> "SqrtQNumber":
        return self._wrap(self.a - other.a, self.b - other.b)

    def inverse(self) -> "SqrtQNumber":
        den = self.a * self.a - self.b * self.b * self.q
        if den == 0:
            raise ZeroDivisionError("zero element")
        return self._wrap(self.a / den, -self.b / den)

    def is_nonnegative(self) -> bool:
        a, b, q = self.a, self.b, self.q
        if a >= 0 and b >= 0:
            return True
        if a < 0 and b <= 0:
            return False
        if a >= 0:  # b < 0: a >= |b| sqrt(q)?
            return a * a >= b * b * q
        return b * b * q >= a * a  # a < 0 <= b

    def __le__(self, other: "SqrtQNumber") -> bool:
        return (other - self).is_nonnegative()


def sqrt_q_power(q: Fraction, half_steps: int) -> SqrtQNumber:
    """q^(half_steps/2) as an exact element of Q(sqrt(q))."""
    whole, rem = divmod(half_steps, 2)
    a = q**whole
    if rem:
        return SqrtQNumber(Fraction(0), a, q)
    return SqrtQNumber(a, Fraction(0), q)


def energy_tail_constant(q: Fraction, terms: int = 200) -> SqrtQNumber:
    """Truncation of q^(1/2) * prod_{i>=1} (1 - q^(i/2))^(-1).

    The truncated product underestimates the full constant, so verifying the
    tail bound against it is only stronger.
    """
    q = _check_q(q)
    acc = sqrt_q_power(q, 1)
    for i in range(1, terms + 1):
        one = SqrtQNumber(Fraction(1), Fraction(0), q)
        acc = acc * (one - sqrt_q_power(q, i)).inverse()
    return acc


def check_energy_tail(measure: ProjectedMeasure, terms: int = 200) -> bool:
    """Exact verification of P[kappa > a] <= C q^(a/2) for every a.

    C is the constant from the geometric-series bound on the partition
    generating function; comparisons are exact in Q(sqrt(q)).
    """
    if measure.q == 0:
        return True  # the energy is 0 almost surely
    dist = energy_distribution(measure)
    max_a = max(dist)
    const = energy_tail_constant(measure.q, terms)
    tail = Fraction(0)
    ok = True
    for a in range(max_a, -1, -1):
        tail += dist.get(a + 1, Fraction(0))
        lhs = SqrtQNumber(tail, Fraction(0), measure.q)
        rhs = const * sqrt_q_power(measure.q, a)
        if not lhs <= rhs:
            ok = False
            break
    return ok


def enumerate_permutations(interval: Interval) -> Iterable[Permutation]:
    """All permutations of an interval (sizes <= 8 only)."""
    import itertools

    if interval.size > 8:
        raise UnsupportedSizeError("refusing to enumerate more than 8! permutations")
    for vals in itertools.permutations(interval.sites()):
        yield Permutation(interval, vals)

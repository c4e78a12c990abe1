"""Domain types for the card shuffling and its particle projections.

States live on a discrete interval [[m, n]] (all integers from m to n).  A
``Permutation`` is the multi-species state, a ``BinaryConfig`` the
single-species (particle/hole) state, and a ``HeightFunction`` the standard
1-Lipschitz encoding of a binary configuration.

Height convention: moving right across a particle the height drops by one,
across a hole it rises by one, i.e. ``h(x) - h(x-1) = 1 - 2*omega(x)``.  The
left tail is anchored to ``h(x) = x`` when the left fill is zeros and to
``h(x) = -x`` when the left fill is ones.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

from asepmix.errors import InvalidInputError


class Fill(enum.Enum):
    """Boundary fill convention outside a finite window."""

    ZEROS = "zeros"
    ONES = "ones"


@dataclass(frozen=True)
class Interval:
    """Discrete interval [[m, n]], m <= n."""

    m: int
    n: int

    def __post_init__(self) -> None:
        if self.m > self.n:
            raise InvalidInputError(f"empty interval [[{self.m}, {self.n}]]")

    @property
    def size(self) -> int:
        return self.n - self.m + 1

    def sites(self) -> range:
        return range(self.m, self.n + 1)

    def edges(self) -> range:
        """Left endpoints x of the nearest-neighbour edges (x, x+1) inside."""
        return range(self.m, self.n)

    def __contains__(self, x: int) -> bool:
        return self.m <= x <= self.n

    def __iter__(self) -> Iterator[int]:
        return iter(self.sites())


@dataclass(frozen=True)
class BoundaryMode:
    left_fill: Fill
    right_fill: Fill


#: Finite-interval convention for projections: holes to the left, particles
#: to the right.
FINITE_BOUNDARY = BoundaryMode(Fill.ZEROS, Fill.ONES)


@dataclass(frozen=True)
class Permutation:
    """A bijection of [[m, n]] onto itself, stored in one-line notation.

    ``values[i]`` is the image of site ``m + i``.
    """

    interval: Interval
    values: tuple[int, ...]

    def __post_init__(self) -> None:
        iv = self.interval
        if len(self.values) != iv.size:
            raise InvalidInputError("one-line notation has wrong length")
        if sorted(self.values) != list(iv.sites()):
            raise InvalidInputError(f"not a bijection of [[{iv.m}, {iv.n}]]")

    @classmethod
    def identity(cls, interval: Interval) -> "Permutation":
        return cls(interval, tuple(interval.sites()))

    @classmethod
    def reversal(cls, interval: Interval) -> "Permutation":
        """The zero-energy ground state x -> m + n - x."""
        return cls(interval, tuple(interval.m + interval.n - x for x in interval.sites()))

    @classmethod
    def from_one_line(cls, values: Sequence[int], m: int = 1) -> "Permutation":
        values = tuple(int(v) for v in values)
        return cls(Interval(m, m + len(values) - 1), values)

    def __call__(self, x: int) -> int:
        if x not in self.interval:
            raise InvalidInputError(f"site {x} outside [[{self.interval.m}, {self.interval.n}]]")
        return self.values[x - self.interval.m]

    def inverse(self) -> "Permutation":
        cached = self.__dict__.get("_inverse")
        if cached is None:
            m = self.interval.m
            inv = [0] * self.interval.size
            for i, v in enumerate(self.values):
                inv[v - m] = m + i
            cached = Permutation(self.interval, tuple(inv))
            object.__setattr__(self, "_inverse", cached)
            object.__setattr__(cached, "_inverse", self)
        return cached

    def swap_at(self, x: int) -> "Permutation":
        """New permutation with the values at sites x, x+1 exchanged."""
        i = x - self.interval.m
        if i < 0 or i + 1 >= self.interval.size:
            raise InvalidInputError(f"edge ({x}, {x + 1}) outside the interval")
        vals = list(self.values)
        vals[i], vals[i + 1] = vals[i + 1], vals[i]
        return Permutation(self.interval, tuple(vals))


@dataclass(frozen=True)
class BinaryConfig:
    """A 0/1 configuration on [[m, n]] with declared boundary fills."""

    interval: Interval
    bits: tuple[int, ...]
    boundary: BoundaryMode = FINITE_BOUNDARY

    def __post_init__(self) -> None:
        if len(self.bits) != self.interval.size:
            raise InvalidInputError("bit string has wrong length")
        if any(b not in (0, 1) for b in self.bits):
            raise InvalidInputError("bits must be 0 or 1")

    def __call__(self, x: int) -> int:
        """Value at any site, using the boundary fill outside the window."""
        if x < self.interval.m:
            return 0 if self.boundary.left_fill is Fill.ZEROS else 1
        if x > self.interval.n:
            return 0 if self.boundary.right_fill is Fill.ZEROS else 1
        return self.bits[x - self.interval.m]

    @property
    def particle_count(self) -> int:
        return sum(self.bits)


@dataclass(frozen=True)
class HeightFunction:
    """Integer-valued 1-Lipschitz function with unit steps and linear tails.

    Stored as an anchor point plus +-1 increments across the window
    [[anchor_x + 1, anchor_x + len(increments)]]; outside the window the
    declared tail slopes apply.
    """

    anchor_x: int
    anchor_value: int
    increments: tuple[int, ...]
    slope_left: int
    slope_right: int

    def __post_init__(self) -> None:
        if any(d not in (-1, 1) for d in self.increments):
            raise InvalidInputError("height increments must be +-1")
        if self.slope_left not in (-1, 1) or self.slope_right not in (-1, 1):
            raise InvalidInputError("tail slopes must be +-1")

    @property
    def window_end(self) -> int:
        return self.anchor_x + len(self.increments)

    def __call__(self, x: int) -> int:
        if x <= self.anchor_x:
            return self.anchor_value + self.slope_left * (x - self.anchor_x)
        end = self.window_end
        inside = self.anchor_value + sum(self.increments[: min(x, end) - self.anchor_x])
        if x <= end:
            return inside
        return inside + self.slope_right * (x - end)

    def values_on(self, window: Interval) -> list[int]:
        return [self(x) for x in window.sites()]


# ---------------------------------------------------------------------------
# Energies
# ---------------------------------------------------------------------------


def energy_perm(w: Permutation) -> int:
    """Number of increasing pairs of w: pairs i < j with w(i) < w(j).

    Zero exactly at the reversal, maximal (size choose 2) at the identity.
    """
    vals = w.values
    return sum(1 for i in range(len(vals)) for j in range(i + 1, len(vals)) if vals[i] < vals[j])


def energy_config(omega: BinaryConfig) -> int:
    """Number of (particle, hole) pairs in order: i < j, omega(i)=1, omega(j)=0."""
    count = 0
    particles_seen = 0
    for b in omega.bits:
        if b == 1:
            particles_seen += 1
        else:
            count += particles_seen
    return count


# ---------------------------------------------------------------------------
# Projections and recovery
# ---------------------------------------------------------------------------


def project_threshold(w: Permutation, threshold: int) -> BinaryConfig:
    """Single-species projection: site x carries a particle iff w(x) <= threshold."""
    bits = tuple(1 if v <= threshold else 0 for v in w.values)
    return BinaryConfig(w.interval, bits, FINITE_BOUNDARY)


def recover_from_projections(configs: Mapping[int, BinaryConfig]) -> Permutation:
    """Rebuild the permutation whose threshold projections are ``configs``.

    ``configs`` must hold one entry per threshold k in the value range, each a
    projection of the same permutation; w(x) = min{k : configs[k](x) = 1}.
    """
    if not configs:
        raise InvalidInputError("no projections given")
    iv = next(iter(configs.values())).interval
    thresholds = sorted(configs)
    if thresholds != list(iv.sites()):
        raise InvalidInputError(
            f"need one projection per threshold in [[{iv.m}, {iv.n}]], got {thresholds}"
        )
    prev_bits = (0,) * iv.size
    values: list[int | None] = [None] * iv.size
    for k in thresholds:
        cfg = configs[k]
        if cfg.interval != iv:
            raise InvalidInputError("projections on mismatched intervals")
        if cfg.particle_count != k - iv.m + 1:
            raise InvalidInputError(f"projection at threshold {k} has wrong particle count")
        for i, (lo, hi) in enumerate(zip(prev_bits, cfg.bits)):
            if lo > hi:
                raise InvalidInputError(f"projections not monotone at threshold {k}")
            if lo < hi:
                values[i] = k
        prev_bits = cfg.bits
    if any(v is None for v in values):
        raise InvalidInputError("inconsistent projection family")
    return Permutation(iv, tuple(values))  # type: ignore[arg-type]


# ---------------------------------------------------------------------------
# Height functions
# ---------------------------------------------------------------------------


def height(omega: BinaryConfig) -> HeightFunction:
    """Height function of a configuration under its own boundary mode."""
    m = omega.interval.m
    if omega.boundary.left_fill is Fill.ZEROS:
        anchor_value, slope_left = m - 1, 1
    else:
        anchor_value, slope_left = -(m - 1), -1
    slope_right = 1 if omega.boundary.right_fill is Fill.ZEROS else -1
    increments = tuple(1 - 2 * b for b in omega.bits)
    return HeightFunction(m - 1, anchor_value, increments, slope_left, slope_right)


def height_prime(omega: BinaryConfig) -> HeightFunction:
    """Height with the left fill forced to ones (slope -1 far left)."""
    forced = BinaryConfig(
        omega.interval, omega.bits, BoundaryMode(Fill.ONES, omega.boundary.right_fill)
    )
    return height(forced)


def is_dominated(h1: HeightFunction, h2: HeightFunction, window: Interval) -> bool:
    """True iff h1 <= h2 pointwise on the window."""
    return all(h1(x) <= h2(x) for x in window.sites())


# ---------------------------------------------------------------------------
# Textual round-trip formats
# ---------------------------------------------------------------------------


def perm_to_text(w: Permutation) -> str:
    """One-line notation, comma separated.  The interval is implied by the values."""
    return ",".join(str(v) for v in w.values)


def perm_from_text(text: str) -> Permutation:
    try:
        values = tuple(int(part) for part in text.strip().split(","))
    except ValueError as exc:
        raise InvalidInputError(f"bad permutation text {text!r}") from exc
    if not values:
        raise InvalidInputError("empty permutation text")
    return Permutation(Interval(min(values), max(values)), values)


def config_to_text(omega: BinaryConfig) -> str:
    """Bit string plus interval origin and boundary-mode tag."""
    bits = "".join(str(b) for b in omega.bits)
    return (
        f"{bits}|m={omega.interval.m}"
        f"|left={omega.boundary.left_fill.value}|right={omega.boundary.right_fill.value}"
    )


def config_from_text(text: str) -> BinaryConfig:
    try:
        bits_part, m_part, left_part, right_part = text.strip().split("|")
        bits = tuple(int(c) for c in bits_part)
        m = int(m_part.removeprefix("m="))
        left = Fill(left_part.removeprefix("left="))
        right = Fill(right_part.removeprefix("right="))
    except (ValueError, KeyError) as exc:
        raise InvalidInputError(f"bad configuration text {text!r}") from exc
    return BinaryConfig(Interval(m, m + len(bits) - 1), bits, BoundaryMode(left, right))

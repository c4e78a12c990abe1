"""Exact Hecke-algebra engine over permutations of an interval.

Convention (fixed once, everything below depends on it): the group product is
``uv = v o u``, so for an adjacent transposition s at edge i, ``s w`` is w
with the *values at positions* i, i+1 exchanged -- exactly the move the card
shuffling performs.  Multiplying by a generator obeys

    T_s T_w = T_{sw}                 if the swap lowers the energy
    T_s T_w = (1-q) T_w + q T_{sw}   if the swap raises it,

energy counting increasing pairs.  General products decompose T_w along a
reduced word (peeling descents); associativity is verified exhaustively in
the tests rather than assumed.

Coefficients are exact rationals throughout.  The continuous-time shuffle
element uses float Poisson weights converted exactly to rationals and
renormalized, with the truncation defect reported, so probability elements
still sum to exactly one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, NamedTuple

from asepmix.configs import Interval, Permutation
from asepmix.errors import InvalidInputError, UnsupportedSizeError
from asepmix.mallows import MallowsMeasure, enumerate_permutations, mallows_prob

_MAX_DENSE = 7

Coeffs = dict[tuple[int, ...], Fraction]


@dataclass(frozen=True)
class HeckeElement:
    """Sparse rational combination of basis elements T_w, w on one interval."""

    interval: Interval
    q: Fraction
    coeffs: Coeffs

    def __post_init__(self) -> None:
        for w, c in self.coeffs.items():
            if len(w) != self.interval.size:
                raise InvalidInputError("basis permutation on the wrong interval")
            if c == 0:
                raise InvalidInputError("sparse coefficients must be nonzero")

    def coefficient(self, w: Permutation) -> Fraction:
        return self.coeffs.get(w.values, Fraction(0))

    def mass(self) -> Fraction:
        return sum(self.coeffs.values(), Fraction(0))

    def support(self) -> Iterator[Permutation]:
        for w in sorted(self.coeffs):
            yield Permutation(self.interval, w)

    def __add__(self, other: "HeckeElement") -> "HeckeElement":
        _check_same(self, other)
        out = dict(self.coeffs)
        for w, c in other.coeffs.items():
            out[w] = out.get(w, Fraction(0)) + c
        return HeckeElement(self.interval, self.q, _drop_zeros(out))

    def scaled(self, factor: Fraction) -> "HeckeElement":
        if factor == 0:
            return HeckeElement(self.interval, self.q, {})
        return HeckeElement(self.interval, self.q, {w: c * factor for w, c in self.coeffs.items()})

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, HeckeElement):
            return NotImplemented
        return (
            self.interval == other.interval
            and self.q == other.q
            and self.coeffs == other.coeffs
        )


def _drop_zeros(coeffs: Coeffs) -> Coeffs:
    return {w: c for w, c in coeffs.items() if c != 0}


def _check_same(a: HeckeElement, b: HeckeElement) -> None:
    if a.interval != b.interval or a.q != b.q:
        raise InvalidInputError("elements live on different intervals or parameters")


class ProbabilityElement:
    """A Hecke element with nonnegative coefficients summing to exactly 1."""

    def __init__(self, element: HeckeElement):
        if any(c < 0 for c in element.coeffs.values()):
            raise InvalidInputError("probability element has a negative coefficient")
        if element.mass() != 1:
            raise InvalidInputError("probability element mass must be exactly 1")
        self.element = element

    @property
    def interval(self) -> Interval:
        return self.element.interval

    def distribution(self) -> dict[tuple[int, ...], Fraction]:
        return dict(self.element.coeffs)


def basis_element(interval: Interval, q: Fraction, w: Permutation) -> HeckeElement:
    if w.interval != interval:
        raise InvalidInputError("permutation not on the requested interval")
    return HeckeElement(interval, Fraction(q), {w.values: Fraction(1)})


def identity_element(interval: Interval, q: Fraction) -> HeckeElement:
    return basis_element(interval, q, Permutation.identity(interval))


def left_mul_generator(edge: int, a: HeckeElement) -> HeckeElement:
    """T_s . a for s the adjacent transposition at (edge, edge+1)."""
    iv = a.interval
    if edge < iv.m or edge + 1 > iv.n:
        raise InvalidInputError(f"transposition at {edge} outside [[{iv.m}, {iv.n}]]")
    i = edge - iv.m
    q = a.q
    out: Coeffs = {}
    for w, c in a.coeffs.items():
        sw = w[:i] + (w[i + 1], w[i]) + w[i + 2 :]
        if w[i] < w[i + 1]:
            out[sw] = out.get(sw, Fraction(0)) + c
        else:
            out[w] = out.get(w, Fraction(0)) + (1 - q) * c
            out[sw] = out.get(sw, Fraction(0)) + q * c
    return HeckeElement(iv, q, _drop_zeros(out))


def _reduced_word(values: tuple[int, ...]) -> list[int]:
    """Descent-peeling word: indices i (0-based) with T_w = T_{s_{i_0}} T_{s_{i_1}} ..."""
    vals = list(values)
    word = []
    done = False
    while not done:
        done = True
        for i in range(len(vals) - 1):
            if vals[i] > vals[i + 1]:
                word.append(i)
                vals[i], vals[i + 1] = vals[i + 1], vals[i]
                done = False
                break
    return word


def multiply(a: HeckeElement, b: HeckeElement) -> HeckeElement:
    """Bilinear product; T_w . b is computed along a reduced word of w."""
    _check_same(a, b)
    iv = a.interval
    acc: Coeffs = {}
    for w, c in a.coeffs.items():
        x = b
        for i in reversed(_reduced_word(w)):
            x = left_mul_generator(iv.m + i, x)
        for v, d in x.coeffs.items():
            acc[v] = acc.get(v, Fraction(0)) + c * d
    return HeckeElement(iv, a.q, _drop_zeros(acc))


def involution(a: HeckeElement) -> HeckeElement:
    """The involutive anti-homomorphism T_w -> T_{w^{-1}}."""
    iv = a.interval
    out: Coeffs = {}
    for w, c in a.coeffs.items():
        inv = [0] * len(w)
        for i, v in enumerate(w):
            inv[v - iv.m] = iv.m + i
        out[tuple(inv)] = c
    return HeckeElement(iv, a.q, out)


def mallows_element(m: int, n: int, q: Fraction) -> ProbabilityElement:
    """Sum of q^energy(w) Z T_w over all w; the stationary element."""
    iv = Interval(m, n)
    if iv.size > _MAX_DENSE:
        raise UnsupportedSizeError(f"dense enumeration capped at size {_MAX_DENSE}")
    measure = MallowsMeasure(iv, Fraction(q))
    coeffs = {w.values: mallows_prob(measure, w) for w in enumerate_permutations(iv)}
    return ProbabilityElement(HeckeElement(iv, Fraction(q), coeffs))


def hat_element(m: int, n: int, q: Fraction) -> HeckeElement:
    """Uniform average of the generators: (n-m)^{-1} sum_i T_{s_i}."""
    iv = Interval(m, n)
    if iv.size < 2:
        raise InvalidInputError("need at least two sites")
    weight = Fraction(1, n - m)
    coeffs: Coeffs = {}
    for i in iv.edges():
        s = Permutation.identity(iv).swap_at(i)
        coeffs[s.values] = weight
    return HeckeElement(iv, Fraction(q), coeffs)


def hat_power_series(m: int, n: int, q: Fraction, orders: int) -> list[HeckeElement]:
    """[T_id, T_hat, T_hat^2, ..., T_hat^orders], all exact."""
    iv = Interval(m, n)
    if iv.size > _MAX_DENSE:
        raise UnsupportedSizeError(f"dense enumeration capped at size {_MAX_DENSE}")
    hat = hat_element(m, n, q)
    out = [identity_element(iv, Fraction(q))]
    for _ in range(orders):
        out.append(multiply(hat, out[-1]))
    return out


class ShuffleResult(NamedTuple):
    element: ProbabilityElement
    truncation_defect: float
    order: int


def shuffle_element(
    m: int, n: int, q: Fraction, t: float, tol: float = 1e-12
) -> ShuffleResult:
    """Time-t law of the shuffling started from the identity, as a Poisson
    mixture of T_hat powers truncated once the tail mass drops below ``tol``.

    The truncated weights are renormalized (exactly, as rationals) and the
    discarded tail mass is reported, never silently reassigned.
    """
    if t < 0:
        raise InvalidInputError("time must be nonnegative")
    lam = (n - m) * t
    weights = []
    acc = 0.0
    p = math.exp(-lam)
    i = 0
    while acc < 1.0 - tol or i == 0:
        weights.append(p)
        acc += p
        i += 1
        p *= lam / i
        if i > 100000:
            raise InvalidInputError("Poisson truncation did not converge")
    powers = hat_power_series(m, n, q, len(weights) - 1)
    iv = Interval(m, n)
    total = sum((Fraction(wt) for wt in weights), Fraction(0))
    coeffs: Coeffs = {}
    for wt, power in zip(weights, powers):
        f = Fraction(wt) / total
        for w, c in power.coeffs.items():
            coeffs[w] = coeffs.get(w, Fraction(0)) + f * c
    element = HeckeElement(iv, Fraction(q), _drop_zeros(coeffs))
    return ShuffleResult(ProbabilityElement(element), 1.0 - acc, len(weights) - 1)


def embed(a: HeckeElement, ambient: Interval) -> HeckeElement:
    """Natural embedding: basis permutations fix every site outside their interval."""
    iv = a.interval
    if iv.m < ambient.m or iv.n > ambient.n:
        raise InvalidInputError("ambient interval does not contain the element's")
    out: Coeffs = {}
    for w, c in a.coeffs.items():
        big = list(ambient.sites())
        for i, v in enumerate(w):
            big[iv.m - ambient.m + i] = v
        out[tuple(big)] = c
    return HeckeElement(ambient, a.q, out)


def increasing_recompose(w: Permutation, sub: Interval, v: Permutation) -> Permutation:
    """Replace w on ``sub`` by phi o v, phi the increasing bijection from sub
    onto the values w takes there.  With v Mallows-distributed this realizes
    left-multiplication of the law of w by the sub-interval Mallows element
    (running the sub-interval dynamics to equilibrium)."""
    iv = w.interval
    if sub.m < iv.m or sub.n > iv.n:
        raise InvalidInputError("sub-interval not contained in the permutation's interval")
    if v.interval != sub:
        raise InvalidInputError("v must be a permutation of the sub-interval")
    sub_vals = sorted(w(x) for x in sub.sites())
    phi = {sub.m + j: val for j, val in enumerate(sub_vals)}
    new_vals = list(w.values)
    for x in sub.sites():
        new_vals[x - iv.m] = phi[v(x)]
    return Permutation(iv, tuple(new_vals))


def element_to_text(a: HeckeElement) -> str:
    """Canonical dump: one 'one-line-permutation : coefficient' line per term."""
    lines = [f"{','.join(str(v) for v in w)} : {c}" for w, c in sorted(a.coeffs.items())]
    return "\n".join(lines) + "\n"


def element_from_text(text: str, interval: Interval, q: Fraction) -> HeckeElement:
    coeffs: Coeffs = {}
    for line in text.strip().splitlines():
        perm_part, coeff_part = line.split(":")
        w = tuple(int(p) for p in perm_part.strip().split(","))
        coeffs[w] = Fraction(coeff_part.strip())
    return HeckeElement(interval, Fraction(q), coeffs)


# ---------------------------------------------------------------------------
# Exactness check suite (used by tests and the hecke-verify subcommand)
# ---------------------------------------------------------------------------


def run_exactness_checks(size: int, q: Fraction, orders: int = 8) -> dict[str, bool]:
    """Exhaustive exact identities on S_size (size <= 4 is practical).

    Includes associativity over all basis triples, the anti-homomorphism
    property of the involution, absorption by the Mallows element, symmetry
    of the shuffle series, and the two product/involution identities on the
    interval [[-1, 2]] (independent of ``size``).
    """
    q = Fraction(q)
    iv = Interval(1, size)
    perms = [w.values for w in enumerate_permutations(iv)]
    basis = {w: HeckeElement(iv, q, {w: Fraction(1)}) for w in perms}
    # full product table
    table = {(u, w): multiply(basis[u], basis[w]) for u in perms for w in perms}

    def elem_mul(a: HeckeElement, b: HeckeElement) -> HeckeElement:
        acc: Coeffs = {}
        for u, cu in a.coeffs.items():
            for w, cw in b.coeffs.items():
                for v, d in table[(u, w)].coeffs.items():
                    acc[v] = acc.get(v, Fraction(0)) + cu * cw * d
        return HeckeElement(iv, q, _drop_zeros(acc))

    results: dict[str, bool] = {}
    results["associativity"] = all(
        elem_mul(table[(u, v)], basis[w]) == elem_mul(basis[u], table[(v, w)])
        for u in perms
        for v in perms
        for w in perms
    )
    results["anti_homomorphism"] = all(
        involution(table[(u, w)]) == multiply(involution(basis[w]), involution(basis[u]))
        for u in perms
        for w in perms
    )
    mal = mallows_element(1, size, q).element
    results["generator_absorbs_mallows"] = all(
        left_mul_generator(i, mal) == mal for i in iv.edges()
    )
    results["mallows_idempotent"] = multiply(mal, mal) == mal
    results["involution_fixes_mallows"] = involution(mal) == mal
    powers = hat_power_series(1, size, q, orders)
    results["involution_fixes_shuffle_series"] = all(
        involution(p) == p for p in powers
    )
    results["mallows_absorbs_shuffle_series"] = all(
        multiply(p, mal) == mal for p in powers
    )

    amb = Interval(-1, 2)
    powers_amb = hat_power_series(-1, 2, q, orders)
    ok_32 = True
    ok_33 = True
    for k in (0, 1, 2):
        m1 = embed(mallows_element(-1, k, q).element, amb)
        m2 = embed(mallows_element(-1 + k, 2, q).element, amb)
        for p in powers_amb:
            lhs = multiply(p, m1)
            rhs = involution(multiply(m1, p))
            ok_32 = ok_32 and lhs == rhs
            lhs2 = multiply(multiply(p, m1), m2)
            rhs2 = involution(multiply(multiply(m2, m1), p))
            ok_33 = ok_33 and lhs2 == rhs2
    results["identity_shuffle_mallows"] = ok_32
    results["identity_shuffle_double_mallows"] = ok_33
    return results

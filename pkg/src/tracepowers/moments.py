"""Exact Haar expectations of monomials in trace powers.

The closed forms implemented here are the classical moment formulas for the
three compact groups: products of the ``g_j`` polynomials for SO(n), the
same with an alternating sign for USp(2n), and ``delta_{ab} * prod j^a a!``
for U(n).  Each value is valid only for ranks above a threshold that depends
on the number of trace factors; the threshold is returned, never enforced,
so symbolic callers can keep working with formal n while recording the
domain on which the resulting identity is guaranteed.

A second, independent route to the same numbers goes through shifted
Gaussian moments (:func:`normal_moment`); the two are compared exactly in
the test suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping

from .symfunc import CoeffPoly, Group, Monomial, PowerSumPoly

__all__ = [
    "MomentQuery",
    "MomentResult",
    "ExpectationResult",
    "g_poly",
    "normal_moment",
    "moment",
    "expectation",
]


def _double_factorial(m: int) -> int:
    """(m)!! for odd m >= -1; the empty product for m <= 0."""
    out = 1
    while m > 1:
        out *= m
        m -= 2
    return out


def g_poly(j: int, a: int) -> Fraction:
    """The moment polynomial g_j(a).

    Odd j: 0 for odd a and ``j**(a/2) * (a-1)!!`` for even a.  Even j:
    ``1 + sum_k C(a, 2k) j^k (2k-1)!!``.
    """
    if j < 1 or a < 0:
        raise ValueError("need j >= 1 and a >= 0")
    if j % 2 == 1:
        if a % 2 == 1:
            return Fraction(0)
        return Fraction(j) ** (a // 2) * _double_factorial(a - 1)
    total = Fraction(1)
    for k in range(1, a // 2 + 1):
        total += math.comb(a, 2 * k) * Fraction(j) ** k \
            * _double_factorial(2 * k - 1)
    return total


def normal_moment(j: int, shift: int | Fraction, a: int) -> Fraction:
    """E[(sqrt(j) Z + shift)^a] for standard normal Z, by binomial expansion.

    Only even powers of Z survive, contributing j^(m/2) (m-1)!!, so the
    result is an exact rational.  This is the independent second path to
    the g_j values.
    """
    if j < 1 or a < 0:
        raise ValueError("need j >= 1 and a >= 0")
    shift = Fraction(shift)
    total = Fraction(0)
    for m in range(0, a + 1, 2):
        total += (math.comb(a, m) * Fraction(j) ** (m // 2)
                  * _double_factorial(m - 1) * shift ** (a - m))
    return total


@dataclass(frozen=True)
class MomentQuery:
    """Exponent vectors of a trace-power monomial.

    ``a`` maps index j to the exponent of p_j; ``b`` (unitary group only)
    maps j to the exponent of the conjugated letter.
    """

    group: Group
    a: Mapping[int, int]
    b: Mapping[int, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.b and not self.group.has_conjugates:
            raise ValueError("conjugate exponents only exist on U")
        object.__setattr__(self, "a", {j: e for j, e in self.a.items() if e})
        object.__setattr__(self, "b", {j: e for j, e in self.b.items() if e})

    @classmethod
    def from_monomial(cls, mono: Monomial, group: Group) -> "MomentQuery":
        a: dict[int, int] = {}
        b: dict[int, int] = {}
        for letter in mono.letters:
            tgt = b if letter.conjugated else a
            tgt[letter.index] = tgt.get(letter.index, 0) + 1
        return cls(group, a, b)

    @property
    def weight(self) -> int:
        return (sum(j * e for j, e in self.a.items())
                + sum(j * e for j, e in self.b.items()))

    @property
    def factor_count(self) -> int:
        return sum(self.a.values()) + sum(self.b.values())


@dataclass(frozen=True)
class MomentResult:
    """An exact moment value with its guaranteed validity threshold.

    ``min_valid_n`` is the smallest rank n for which the closed form is
    guaranteed: factors <= n-1 on SO(n), factors <= 2n+1 on USp(2n),
    factors <= n on U(n).  For USp the weaker classical threshold
    (factors <= n) is also recorded; neither is asserted to be tight.
    """

    value: Fraction
    min_valid_n: int
    alt_min_valid_n: int | None = None


def moment(q: MomentQuery) -> MomentResult:
    """Exact Haar expectation of the monomial described by ``q``."""
    count = q.factor_count
    if q.group is Group.SO:
        value = Fraction(1)
        for j, e in q.a.items():
            value *= g_poly(j, e)
        return MomentResult(value, max(1, count + 1))
    if q.group is Group.USP:
        value = Fraction(1)
        for j, e in q.a.items():
            sign = -1 if ((j - 1) * e) % 2 else 1
            value *= sign * g_poly(j, e)
        # 2n+1 >= count  <=>  n >= (count-1)/2
        return MomentResult(value, max(1, -(-(count - 1) // 2)),
                            alt_min_valid_n=max(1, count))
    # U: delta_ab * prod j^{a_j} a_j!
    if q.a != q.b:
        return MomentResult(Fraction(0), max(1, count))
    value = Fraction(1)
    for j, e in q.a.items():
        value *= Fraction(j) ** e * math.factorial(e)
    return MomentResult(value, max(1, count))


@dataclass(frozen=True)
class ExpectationResult:
    """Linear extension of the moment oracle over a term map."""

    value: CoeffPoly
    min_valid_n: int

    def t_coefficient(self, t_deg: int) -> CoeffPoly:
        return self.value.t_coefficient(t_deg)


def expectation(f: PowerSumPoly) -> ExpectationResult:
    """Termwise Haar expectation of f; coefficients keep n and t.

    The reported threshold is the strongest one encountered over all
    monomials of f (zero-valued moments included: a vanishing moment is an
    oracle statement too).
    """
    total = CoeffPoly.zero(f.trunc)
    min_n = 1
    for mono, coeff in f.items():
        res = moment(MomentQuery.from_monomial(mono, f.group))
        min_n = max(min_n, res.min_valid_n)
        if res.value:
            total = total + coeff * res.value
    return ExpectationResult(total, min_n)

"""Exchangeable-pair verification engine and closed-form error bounds.

For the normalized trace-power statistic W on each group, the heat action
supplies the pair (W, W'): every conditional-moment identity used by the
normal-approximation argument is reconstructed here as an exact polynomial
identity in the rank variable n (at first order in t), and compared against
its classical closed form.  The final Kolmogorov-distance bound has three
terms; the third vanishes in the t -> 0 limit, leaving

    6 * sqrt(Var E[(W'-W)^2 | M]) / a   +   19 * sqrt(E[R^2]) / a.

The 1/sqrt(j) normalization of W would leave the rational world, so all
computations run on the rescaled statistic (sqrt(j) W or sqrt(2j) W) and
re-attach the scale only where it becomes rational (squared quantities) or
where a float is being reported anyway.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .moments import expectation
from .symfunc import (
    CoeffPoly,
    Group,
    Monomial,
    PowerLetter,
    PowerSumPoly,
    heat_first_order,
)

__all__ = [
    "StatisticSpec",
    "DriftSplit",
    "LemmaReport",
    "SteinBound",
    "LEMMA_KINDS",
    "build_w",
    "conditional_drift",
    "conditional_square_increment",
    "second_moment_increment",
    "variance_coefficient",
    "fourth_moment_linear_coefficient",
    "r_second_moment",
    "stein_bound",
    "run_lemma_suite",
]


@dataclass(frozen=True)
class StatisticSpec:
    """Which statistic: group plus the trace power j.

    Determines W: p_j / sqrt(j) on SO and USp for odd j, with the mean
    shift (p_j - 1) resp. (p_j + 1) for even j, and
    (p_j + conj(p_j)) / sqrt(2j) on U.
    """

    group: Group
    j: int

    def __post_init__(self) -> None:
        if self.j < 1:
            raise ValueError("j must be >= 1")

    @property
    def scale_sq(self) -> Fraction:
        """Square of the normalization: W^2 = scale_sq * (scaled W)^2."""
        if self.group is Group.U:
            return Fraction(1, 2 * self.j)
        return Fraction(1, self.j)

    @property
    def shift(self) -> int:
        """Additive centering inside the scaled statistic."""
        if self.group is Group.U or self.j % 2 == 1:
            return 0
        return -1 if self.group is Group.SO else 1

    def bound_hypothesis(self, n_value: int) -> bool:
        """Whether 4j is within the group's non-trivial-bound regime."""
        if self.group is Group.SO:
            return 4 * self.j <= n_value - 1
        if self.group is Group.USP:
            return 4 * self.j <= 2 * n_value + 1
        return 4 * self.j <= n_value

    @property
    def bound_hypothesis_text(self) -> str:
        return {Group.SO: "4j <= n-1", Group.USP: "4j <= 2n+1",
                Group.U: "4j <= n"}[self.group]


def build_w(spec: StatisticSpec, trunc: int = 1) -> PowerSumPoly:
    """The rescaled statistic (sqrt(j) or sqrt(2j) times W)."""
    w = PowerSumPoly.letter(spec.group, spec.j, trunc=trunc)
    if spec.group is Group.U:
        return w + PowerSumPoly.letter(spec.group, spec.j, conjugated=True,
                                       trunc=trunc)
    if spec.shift:
        return w + PowerSumPoly.const(spec.shift, spec.group, trunc)
    return w


@dataclass(frozen=True)
class DriftSplit:
    """E[W'|M] = (1 - a) W + remainder, in the rescaled normalization."""

    a: CoeffPoly
    remainder: PowerSumPoly


def conditional_drift(spec: StatisticSpec, trunc: int = 1) -> DriftSplit:
    """Split the heat image of W into its W-multiple and the remainder.

    The coefficient a is read off the p_j monomial (p_j and its conjugate
    must agree on U); nothing about the expected closed form is assumed.
    """
    w = build_w(spec, trunc)
    hw = heat_first_order(w)
    p_j = Monomial.of(PowerLetter(spec.j))
    one_minus_a = hw.coefficient(p_j)
    if spec.group is Group.U:
        other = hw.coefficient(Monomial.of(PowerLetter(spec.j, True)))
        if other != one_minus_a:
            raise AssertionError(
                "heat image is not a common multiple of p_j and its conjugate")
    a = CoeffPoly.const(1, trunc) - one_minus_a
    remainder = hw - w * one_minus_a
    return DriftSplit(a=a, remainder=remainder)


def conditional_square_increment(spec: StatisticSpec) -> PowerSumPoly:
    """E[(W'-W)^2 | M] to first order in t, true normalization applied.

    Computed as heat(W^2) - 2 W heat(W) + W^2; the t^0 part cancels
    identically, so the result carries only t^1 terms.
    """
    w = build_w(spec)
    w2 = w * w
    out = (heat_first_order(w2) - 2 * (w * heat_first_order(w)) + w2)
    return out * spec.scale_sq


def _second_moment_increment(spec: StatisticSpec) -> tuple[CoeffPoly, int]:
    res = expectation(conditional_square_increment(spec))
    return res.value, res.min_valid_n


def second_moment_increment(spec: StatisticSpec) -> CoeffPoly:
    """E[(W'-W)^2] at order t (a polynomial in n times t)."""
    return _second_moment_increment(spec)[0]


def _variance_coefficient(spec: StatisticSpec) -> tuple[CoeffPoly, int]:
    x1 = conditional_square_increment(spec).t_coefficient(1)
    mean = expectation(x1)
    centered = x1 - PowerSumPoly.const(mean.value, spec.group, x1.trunc)
    sq = expectation(centered * centered)
    return sq.value.shift_t(2), max(mean.min_valid_n, sq.min_valid_n)


def variance_coefficient(spec: StatisticSpec) -> CoeffPoly:
    """The exact t^2 coefficient of Var(E[(W'-W)^2 | M]), times t^2."""
    return _variance_coefficient(spec)[0]


def _fourth_moment_linear(spec: StatisticSpec) -> tuple[CoeffPoly, int]:
    w = build_w(spec)
    w2 = w * w
    combo = (2 * (w2 * w2)
             - 8 * (w2 * w * heat_first_order(w))
             + 6 * (w2 * heat_first_order(w2)))
    res = expectation(combo)
    scale4 = spec.scale_sq * spec.scale_sq
    return (res.value * scale4).t_coefficient(1), res.min_valid_n


def fourth_moment_linear_coefficient(spec: StatisticSpec) -> CoeffPoly:
    """The t^1 coefficient of E[(W'-W)^4]; zero when the identity holds.

    Uses the exchangeable-pair expansion
    2 E[W^4] - 8 E[W^3 E[W'|M]] + 6 E[W^2 E[(W')^2|M]].
    """
    return _fourth_moment_linear(spec)[0]


def _r_second_moment(spec: StatisticSpec) -> tuple[CoeffPoly, int]:
    r1 = conditional_drift(spec).remainder.t_coefficient(1)
    res = expectation(r1 * r1)
    return (res.value * spec.scale_sq).shift_t(2), res.min_valid_n


def r_second_moment(spec: StatisticSpec) -> CoeffPoly:
    """The exact t^2 coefficient of E[R(M)^2], times t^2."""
    return _r_second_moment(spec)[0]


# ---------------------------------------------------------------------------
# Reference closed forms the suite re-derives.
# ---------------------------------------------------------------------------

def reference_drift_rate(spec: StatisticSpec) -> CoeffPoly:
    """a/t: (n-1)j/2 on SO, (2n+1)j/2 on USp, nj on U."""
    j = Fraction(spec.j)
    if spec.group is Group.SO:
        return CoeffPoly({(1, 0): j / 2, (0, 0): -j / 2}, 1)
    if spec.group is Group.USP:
        return CoeffPoly({(1, 0): j, (0, 0): j / 2}, 1)
    return CoeffPoly({(1, 0): j}, 1)


def _pair_sum(group: Group, j: int, conjugated: bool = False) -> PowerSumPoly:
    out = PowerSumPoly.zero(group, 1)
    for l in range(1, j):
        out = out + (PowerSumPoly.letter(group, l, conjugated=conjugated)
                     * PowerSumPoly.letter(group, j - l, conjugated=conjugated))
    return out


def _reflect_sum(group: Group, j: int) -> PowerSumPoly:
    out = PowerSumPoly.zero(group, 1)
    for l in range(1, j):
        out = out + PowerSumPoly.letter(group, 2 * l - j)
    return out


def reference_remainder(spec: StatisticSpec) -> PowerSumPoly:
    """The classical remainder R(M) at order t, rescaled by sqrt(j)/sqrt(2j)."""
    g, j = spec.group, spec.j
    half_j = Fraction(j, 2)
    if g is Group.U:
        body = (-Fraction(j) * _pair_sum(g, j)
                - Fraction(j) * _pair_sum(g, j, conjugated=True))
    elif g is Group.SO:
        body = -half_j * _pair_sum(g, j) + half_j * _reflect_sum(g, j)
        if j % 2 == 0:
            body = body + PowerSumPoly.const(
                CoeffPoly({(1, 0): -half_j, (0, 0): half_j}, 1), g, 1)
    else:
        body = -half_j * _reflect_sum(g, j) - half_j * _pair_sum(g, j)
        if j % 2 == 0:
            body = body + PowerSumPoly.const(
                CoeffPoly({(1, 0): Fraction(j), (0, 0): half_j}, 1), g, 1)
    return body * CoeffPoly.t(1)


def reference_square_increment(spec: StatisticSpec) -> PowerSumPoly:
    """t*j*(n - p_2j), t*j*(2n - p_2j), or t*j*(2n - p_2j - conj(p_2j))."""
    g, j = spec.group, spec.j
    n_mult = 1 if g is Group.SO else 2
    body = PowerSumPoly.const(CoeffPoly.n_term(n_mult, 1), g, 1) \
        - PowerSumPoly.letter(g, 2 * j)
    if g is Group.U:
        body = body - PowerSumPoly.letter(g, 2 * j, conjugated=True)
    return body * CoeffPoly.t(1) * Fraction(j)


def reference_variance_t2(spec: StatisticSpec) -> Fraction:
    """2 j^3 on SO and USp, 4 j^3 on U."""
    j = spec.j
    return Fraction(4 * j ** 3 if spec.group is Group.U else 2 * j ** 3)


def reference_second_moment_t1(spec: StatisticSpec) -> CoeffPoly:
    """j(n-1), j(2n+1), or 2jn."""
    j = Fraction(spec.j)
    if spec.group is Group.SO:
        return CoeffPoly({(1, 0): j, (0, 0): -j}, 1)
    if spec.group is Group.USP:
        return CoeffPoly({(1, 0): 2 * j, (0, 0): j}, 1)
    return CoeffPoly({(1, 0): 2 * j}, 1)


def reference_r_second_moment_t2(spec: StatisticSpec) -> Fraction | None:
    """Exact reference value on U ((j^4-j^2)/6 odd, (2j^4+3j^3-2j^2)/12
    even); None for SO/USp, where only the O(j^4) growth bound is claimed.
    """
    if spec.group is not Group.U:
        return None
    j = spec.j
    if j % 2 == 1:
        return Fraction(j ** 4 - j ** 2, 6)
    return Fraction(2 * j ** 4 + 3 * j ** 3 - 2 * j ** 2, 12)


R_GROWTH_CEILING = 2  # coefficient of j^4 in the growth bound on E[R^2]


# ---------------------------------------------------------------------------
# Closed-form distance bound.
# ---------------------------------------------------------------------------

def _sqrt_exact(x: Fraction) -> Fraction | None:
    num, den = math.isqrt(x.numerator), math.isqrt(x.denominator)
    if num * num == x.numerator and den * den == x.denominator:
        return Fraction(num, den)
    return None


@dataclass(frozen=True)
class SteinBound:
    """The two surviving bound terms in the t -> 0 limit (term3 -> 0).

    ``term1_squared_exact`` and ``term2_squared_exact`` carry the exact
    rational squares of the terms (the terms themselves may involve square
    roots); ``term2_exact`` is set when term2 itself is rational.  On U the
    remainder term uses the classical j^4/4 majorant so that it reproduces
    the closed form 19j/(2n); elsewhere it uses the exact remainder moment
    and is flagged ``exact-remainder-moment``.
    """

    group: Group
    j: int
    n: int
    trivial: bool
    term1: float
    term2: float
    total: float
    term3: float = 0.0
    rate_exact: Fraction | None = None
    term1_squared_exact: Fraction | None = None
    term2_squared_exact: Fraction | None = None
    term2_exact: Fraction | None = None
    term2_source: str = ""
    u_reference: float | None = None


def stein_bound(spec: StatisticSpec, n_value: int) -> SteinBound:
    """Evaluate the closed-form Kolmogorov-distance bound at a concrete n.

    Outside the 4j regime the trivial bound 1 is returned (a Kolmogorov
    distance never exceeds 1).
    """
    if n_value < 1:
        raise ValueError("n must be >= 1")
    j = spec.j
    u_ref = 22 * j / n_value if spec.group is Group.U else None
    if not spec.bound_hypothesis(n_value):
        return SteinBound(spec.group, j, n_value, trivial=True,
                          term1=0.0, term2=0.0, total=1.0, u_reference=u_ref)
    rate = reference_drift_rate(spec).substitute_n(n_value).constant_value()
    var_t2 = variance_coefficient(spec).t_coefficient(2).constant_value()
    term1_sq = 36 * var_t2 / rate ** 2
    term1 = 6 * math.sqrt(var_t2) / float(rate)
    if spec.group is Group.U:
        r_arg = Fraction(j ** 4, 4)
        source = "closed-form-majorant"
    else:
        r_arg = r_second_moment(spec).t_coefficient(2).constant_value()
        source = "exact-remainder-moment"
    term2_sq = 361 * r_arg / rate ** 2
    root = _sqrt_exact(r_arg)
    term2_exact = 19 * root / rate if root is not None else None
    term2 = (float(term2_exact) if term2_exact is not None
             else 19 * math.sqrt(r_arg) / float(rate))
    return SteinBound(spec.group, j, n_value, trivial=False,
                      term1=term1, term2=term2, total=term1 + term2,
                      rate_exact=rate,
                      term1_squared_exact=term1_sq,
                      term2_squared_exact=term2_sq,
                      term2_exact=term2_exact,
                      term2_source=source,
                      u_reference=u_ref)


# ---------------------------------------------------------------------------
# Batch verification.
# ---------------------------------------------------------------------------

LEMMA_KINDS = ("drift-split", "square-increment", "variance",
               "increment-mean", "fourth-moment", "remainder-moment")


@dataclass(frozen=True)
class LemmaReport:
    """Outcome of one identity check at one (group, j)."""

    lemma: str
    group: Group
    j: int
    exact: bool
    residual: str
    min_valid_n: int = 1
    hypothesis: str = ""
    detail: str = ""


def _times_t(poly: CoeffPoly, k: int, trunc: int) -> CoeffPoly:
    return CoeffPoly({(dn, dt + k): c for (dn, dt), c in poly.items()}, trunc)


def _check_drift(spec: StatisticSpec) -> LemmaReport:
    split = conditional_drift(spec)
    a_ref = _times_t(reference_drift_rate(spec), 1, split.a.trunc)
    res_a = split.a - a_ref
    res_r = split.remainder - reference_remainder(spec)
    exact = res_a.is_zero() and res_r.is_zero()
    residual = "0" if exact else \
        f"a: {res_a.render()}; R: {res_r.render()}"
    return LemmaReport("drift-split", spec.group, spec.j, exact, residual)


def _check_square_increment(spec: StatisticSpec) -> LemmaReport:
    res = conditional_square_increment(spec) - reference_square_increment(spec)
    return LemmaReport("square-increment", spec.group, spec.j,
                       res.is_zero(), res.render() if not res.is_zero() else "0")


def _check_variance(spec: StatisticSpec) -> LemmaReport:
    value, min_n = _variance_coefficient(spec)
    res = value - CoeffPoly({(0, 2): reference_variance_t2(spec)}, value.trunc)
    return LemmaReport("variance", spec.group, spec.j, res.is_zero(),
                       res.render() if not res.is_zero() else "0",
                       min_valid_n=min_n,
                       hypothesis=spec.bound_hypothesis_text)


def _check_increment_mean(spec: StatisticSpec) -> LemmaReport:
    value, min_n = _second_moment_increment(spec)
    res = value - _times_t(reference_second_moment_t1(spec), 1, value.trunc)
    return LemmaReport("increment-mean", spec.group, spec.j, res.is_zero(),
                       res.render() if not res.is_zero() else "0",
                       min_valid_n=min_n,
                       hypothesis=spec.bound_hypothesis_text)


def _check_fourth_moment(spec: StatisticSpec) -> LemmaReport:
    value, min_n = _fourth_moment_linear(spec)
    return LemmaReport("fourth-moment", spec.group, spec.j, value.is_zero(),
                       value.render() if not value.is_zero() else "0",
                       min_valid_n=min_n,
                       hypothesis=spec.bound_hypothesis_text)


def _check_remainder_moment(spec: StatisticSpec) -> LemmaReport:
    value, min_n = _r_second_moment(spec)
    computed = value.t_coefficient(2).constant_value()
    ref = reference_r_second_moment_t2(spec)
    if ref is None:
        ceiling = R_GROWTH_CEILING * spec.j ** 4
        ok = computed <= ceiling
        detail = f"E[R^2] t^2 coefficient {computed} vs ceiling {ceiling}"
        residual = "0" if ok else f"{computed} > {ceiling}"
    else:
        ok = computed == ref
        detail = f"computed {computed}, reference {ref}"
        residual = "0" if ok else f"{computed - ref}"
    return LemmaReport("remainder-moment", spec.group, spec.j, ok, residual,
                       min_valid_n=min_n,
                       hypothesis=spec.bound_hypothesis_text, detail=detail)


_CHECKS = {
    "drift-split": _check_drift,
    "square-increment": _check_square_increment,
    "variance": _check_variance,
    "increment-mean": _check_increment_mean,
    "fourth-moment": _check_fourth_moment,
    "remainder-moment": _check_remainder_moment,
}


def run_lemma_suite(group: Group, j_max: int,
                    kinds: tuple[str, ...] = LEMMA_KINDS) -> list[LemmaReport]:
    """Run every identity check for j = 1..j_max over one group."""
    if j_max < 1:
        raise ValueError("j_max must be >= 1")
    reports = []
    for j in range(1, j_max + 1):
        spec = StatisticSpec(group, j)
        for kind in kinds:
            reports.append(_CHECKS[kind](spec))
    return reports

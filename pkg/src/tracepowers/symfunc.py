"""Exact algebra of power-sum letters on the classical compact groups.

A :class:`PowerSumPoly` is a finite sum of monomials in the letters
``p_k`` (``Tr(M^k)``; conjugated letters exist only on the unitary group),
with coefficients that are exact rational polynomials in the rank variable
``n`` and a formal time variable ``t`` truncated at a configurable order.
Everything here is exact: no floating point enters this module, so identity
checks are plain equality.

Letters with index zero or a negative index are rewritten eagerly at
construction: ``p_0`` is the trace of the identity (``n``, or ``2n`` on the
compact symplectic group) and ``p_{-k}`` reflects to ``p_k`` (real groups)
or to the conjugated letter (unitary group).

The Laplacian is implemented on the restricted set of generators whose
images are needed downstream (``1``, ``p_j``, ``p_{j,j}`` and, on the
unitary group, their conjugates plus the mixed pair ``p_j * conj(p_j)``).
Anything else raises :class:`OutsideLaplacianDomainError` rather than
returning something silently wrong.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterable, Iterator, Mapping

__all__ = [
    "Group",
    "PowerLetter",
    "Monomial",
    "CoeffPoly",
    "PowerSumPoly",
    "GroupMismatchError",
    "OutsideLaplacianDomainError",
    "UnsupportedHeatOrderError",
    "laplacian",
    "heat_first_order",
]

Rational = int | Fraction


class GroupMismatchError(ValueError):
    """Operands live over different groups or truncation orders."""


class OutsideLaplacianDomainError(ValueError):
    """Monomial outside the restricted Laplacian domain."""


class UnsupportedHeatOrderError(ValueError):
    """Heat expansion requested beyond first order in t."""


class Group(Enum):
    """One of the three classical compact matrix groups.

    The rank variable ``n`` stays symbolic in this module.  ``SO`` is the
    special orthogonal group SO(n), ``USP`` the compact symplectic group
    USp(2n) (matrix size ``2n``), ``U`` the unitary group U(n).
    """

    SO = "SO"
    USP = "USp"
    U = "U"

    @property
    def identity_trace_n_coeff(self) -> int:
        """Trace of the identity as a multiple of n (2 for USp(2n))."""
        return 2 if self is Group.USP else 1

    @property
    def has_conjugates(self) -> bool:
        return self is Group.U

    @classmethod
    def parse(cls, text: str) -> "Group":
        for g in cls:
            if text.lower() in (g.value.lower(), g.name.lower()):
                return g
        raise ValueError(f"unknown group {text!r} (expected SO, USp or U)")


@dataclass(frozen=True, order=True)
class PowerLetter:
    """A single trace-power letter p_k, optionally conjugated (U only)."""

    index: int
    conjugated: bool = False

    def __post_init__(self) -> None:
        if self.index < 1:
            raise ValueError("stored letters must have index >= 1; "
                             "use PowerSumPoly.letter for raw indices")


@dataclass(frozen=True)
class Monomial:
    """A canonically sorted multiset of letters; the empty tuple is 1."""

    letters: tuple[PowerLetter, ...]

    @classmethod
    def of(cls, *letters: PowerLetter) -> "Monomial":
        return cls(tuple(sorted(letters)))

    @property
    def weight(self) -> int:
        return sum(l.index for l in self.letters)

    def __mul__(self, other: "Monomial") -> "Monomial":
        return Monomial(tuple(sorted(self.letters + other.letters)))

    def conjugate(self) -> "Monomial":
        return Monomial(tuple(sorted(
            PowerLetter(l.index, not l.conjugated) for l in self.letters)))

    def render(self) -> str:
        if not self.letters:
            return "1"
        plain = [l.index for l in self.letters if not l.conjugated]
        barred = [l.index for l in self.letters if l.conjugated]
        parts = []
        if plain:
            parts.append("p_{%s}" % ",".join(map(str, plain))
                         if len(plain) > 1 else f"p_{plain[0]}")
        if barred:
            parts.append("p̄_{%s}" % ",".join(map(str, barred))
                         if len(barred) > 1 else f"p̄_{barred[0]}")
        return "*".join(parts)


ONE = Monomial(())


def _as_fraction(x: Rational) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    raise TypeError(f"expected an exact rational, got {type(x).__name__}")


class CoeffPoly:
    """Sparse exact polynomial in (n, t), truncated in t.

    Terms map ``(n_degree, t_degree) -> Fraction``.  Any term with t-degree
    above ``trunc`` is discarded at creation; truncation is idempotent.
    Equality compares mathematical content only, not the truncation order.
    """

    __slots__ = ("_terms", "trunc")

    def __init__(self, terms: Mapping[tuple[int, int], Rational], trunc: int):
        if trunc < 0:
            raise ValueError("truncation order must be >= 0")
        clean: dict[tuple[int, int], Fraction] = {}
        for (dn, dt), c in terms.items():
            if dn < 0 or dt < 0:
                raise ValueError("negative degree")
            if dt > trunc:
                continue
            c = _as_fraction(c)
            if c:
                clean[(dn, dt)] = c
        self._terms = clean
        self.trunc = trunc

    # -- constructors -------------------------------------------------
    @classmethod
    def zero(cls, trunc: int) -> "CoeffPoly":
        return cls({}, trunc)

    @classmethod
    def const(cls, value: Rational, trunc: int) -> "CoeffPoly":
        return cls({(0, 0): value}, trunc)

    @classmethod
    def n_term(cls, coeff: Rational, trunc: int, *, n_deg: int = 1,
               t_deg: int = 0) -> "CoeffPoly":
        return cls({(n_deg, t_deg): coeff}, trunc)

    @classmethod
    def t(cls, trunc: int) -> "CoeffPoly":
        return cls({(0, 1): 1}, trunc)

    # -- queries -------------------------------------------------------
    def items(self) -> Iterator[tuple[tuple[int, int], Fraction]]:
        return iter(sorted(self._terms.items()))

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, n_deg: int, t_deg: int) -> Fraction:
        return self._terms.get((n_deg, t_deg), Fraction(0))

    def t_coefficient(self, t_deg: int) -> "CoeffPoly":
        """The coefficient of t**t_deg, as a t-free polynomial in n."""
        return CoeffPoly({(dn, 0): c for (dn, dt), c in self._terms.items()
                          if dt == t_deg}, self.trunc)

    def shift_t(self, k: int) -> "CoeffPoly":
        """Multiply by t**k, extending the truncation cap to keep all terms."""
        return CoeffPoly({(dn, dt + k): c
                          for (dn, dt), c in self._terms.items()},
                         self.trunc + k)

    def constant_value(self) -> Fraction:
        """The value of a constant polynomial; error if n or t survive."""
        if any(key != (0, 0) for key in self._terms):
            raise ValueError(f"not a constant: {self.render()}")
        return self._terms.get((0, 0), Fraction(0))

    # -- arithmetic -----------------------------------------------------
    def _check(self, other: "CoeffPoly") -> None:
        if self.trunc != other.trunc:
            raise GroupMismatchError(
                f"truncation mismatch: {self.trunc} vs {other.trunc}")

    def __add__(self, other: "CoeffPoly") -> "CoeffPoly":
        self._check(other)
        out = dict(self._terms)
        for key, c in other._terms.items():
            out[key] = out.get(key, Fraction(0)) + c
        return CoeffPoly(out, self.trunc)

    def __neg__(self) -> "CoeffPoly":
        return CoeffPoly({k: -c for k, c in self._terms.items()}, self.trunc)

    def __sub__(self, other: "CoeffPoly") -> "CoeffPoly":
        return self + (-other)

    def __mul__(self, other: "CoeffPoly | Rational") -> "CoeffPoly":
        if isinstance(other, (int, Fraction)):
            return CoeffPoly({k: c * other for k, c in self._terms.items()},
                             self.trunc)
        self._check(other)
        out: dict[tuple[int, int], Fraction] = {}
        for (dn1, dt1), c1 in self._terms.items():
            for (dn2, dt2), c2 in other._terms.items():
                if dt1 + dt2 > self.trunc:
                    continue
                key = (dn1 + dn2, dt1 + dt2)
                out[key] = out.get(key, Fraction(0)) + c1 * c2
        return CoeffPoly(out, self.trunc)

    __rmul__ = __mul__

    def substitute_n(self, n_value: int) -> "CoeffPoly":
        out: dict[tuple[int, int], Fraction] = {}
        for (dn, dt), c in self._terms.items():
            key = (0, dt)
            out[key] = out.get(key, Fraction(0)) + c * Fraction(n_value) ** dn
        return CoeffPoly(out, self.trunc)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction)):
            other = CoeffPoly.const(other, self.trunc)
        if not isinstance(other, CoeffPoly):
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self):  # pragma: no cover - unhashable by intent
        raise TypeError("CoeffPoly is not hashable")

    # -- rendering -------------------------------------------------------
    def render(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for (dn, dt), c in sorted(self._terms.items()):
            factors = []
            if c != 1 or (dn == 0 and dt == 0):
                factors.append(str(c))
            if dn:
                factors.append("n" if dn == 1 else f"n^{dn}")
            if dt:
                factors.append("t" if dt == 1 else f"t^{dt}")
            parts.append("*".join(factors))
        out = " + ".join(parts)
        return out.replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"CoeffPoly({self.render()})"


class PowerSumPoly:
    """A polynomial in normalized power-sum letters over a fixed group."""

    __slots__ = ("_terms", "group", "trunc")

    def __init__(self, terms: Mapping[Monomial, CoeffPoly], group: Group,
                 trunc: int):
        clean: dict[Monomial, CoeffPoly] = {}
        for mono, coeff in terms.items():
            if not group.has_conjugates and any(l.conjugated
                                                for l in mono.letters):
                raise GroupMismatchError(
                    "conjugated letters are only meaningful on U")
            if coeff.trunc != trunc:
                coeff = CoeffPoly(dict(coeff._terms), trunc)
            if not coeff.is_zero():
                clean[mono] = coeff
        self._terms = clean
        self.group = group
        self.trunc = trunc

    # -- constructors ----------------------------------------------------
    @classmethod
    def zero(cls, group: Group, trunc: int = 1) -> "PowerSumPoly":
        return cls({}, group, trunc)

    @classmethod
    def const(cls, value: "Rational | CoeffPoly", group: Group,
              trunc: int = 1) -> "PowerSumPoly":
        if isinstance(value, CoeffPoly):
            return cls({ONE: value}, group, trunc)
        return cls({ONE: CoeffPoly.const(value, trunc)}, group, trunc)

    @classmethod
    def letter(cls, group: Group, index: int, *, conjugated: bool = False,
               trunc: int = 1) -> "PowerSumPoly":
        """The normalized polynomial for a raw letter of any integer index.

        Index 0 becomes the constant ``n`` (``2n`` on USp); a negative index
        reflects to the positive letter, conjugating on U.  This is the only
        entry point that accepts non-positive indices.
        """
        if conjugated and not group.has_conjugates:
            raise GroupMismatchError("conjugated letters are only meaningful on U")
        if index == 0:
            return cls({ONE: CoeffPoly.n_term(group.identity_trace_n_coeff,
                                              trunc)}, group, trunc)
        if index < 0:
            index = -index
            conjugated = (not conjugated) if group.has_conjugates else False
        mono = Monomial.of(PowerLetter(index, conjugated))
        return cls({mono: CoeffPoly.const(1, trunc)}, group, trunc)

    # -- queries -----------------------------------------------------------
    def items(self) -> Iterator[tuple[Monomial, CoeffPoly]]:
        return iter(sorted(self._terms.items(),
                           key=lambda kv: (kv[0].weight, kv[0].letters)))

    def monomials(self) -> Iterable[Monomial]:
        return self._terms.keys()

    def coefficient(self, mono: Monomial) -> CoeffPoly:
        return self._terms.get(mono, CoeffPoly.zero(self.trunc))

    def is_zero(self) -> bool:
        return not self._terms

    def max_weight(self) -> int:
        return max((m.weight for m in self._terms), default=0)

    # -- arithmetic ----------------------------------------------------------
    def _check(self, other: "PowerSumPoly") -> None:
        if self.group is not other.group:
            raise GroupMismatchError(
                f"group mismatch: {self.group.value} vs {other.group.value}")
        if self.trunc != other.trunc:
            raise GroupMismatchError(
                f"truncation mismatch: {self.trunc} vs {other.trunc}")

    def __add__(self, other: "PowerSumPoly") -> "PowerSumPoly":
        self._check(other)
        out = dict(self._terms)
        for mono, c in other._terms.items():
            out[mono] = out[mono] + c if mono in out else c
        return PowerSumPoly(out, self.group, self.trunc)

    def __neg__(self) -> "PowerSumPoly":
        return PowerSumPoly({m: -c for m, c in self._terms.items()},
                            self.group, self.trunc)

    def __sub__(self, other: "PowerSumPoly") -> "PowerSumPoly":
        return self + (-other)

    def __mul__(self, other: "PowerSumPoly | CoeffPoly | Rational"
                ) -> "PowerSumPoly":
        if isinstance(other, (int, Fraction)):
            return PowerSumPoly({m: c * other for m, c in self._terms.items()},
                                self.group, self.trunc)
        if isinstance(other, CoeffPoly):
            return PowerSumPoly({m: c * other for m, c in self._terms.items()},
                                self.group, self.trunc)
        self._check(other)
        out: dict[Monomial, CoeffPoly] = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                mono = m1 * m2
                prod = c1 * c2
                out[mono] = out[mono] + prod if mono in out else prod
        return PowerSumPoly(out, self.group, self.trunc)

    __rmul__ = __mul__

    def conjugate(self) -> "PowerSumPoly":
        """Flip the conjugation flag on every letter (U only)."""
        if not self.group.has_conjugates:
            raise GroupMismatchError("conjugate is only defined on U")
        return PowerSumPoly({m.conjugate(): c for m, c in self._terms.items()},
                            self.group, self.trunc)

    def substitute_n(self, n_value: int) -> "PowerSumPoly":
        if n_value < 1:
            raise ValueError("n must be >= 1")
        return PowerSumPoly(
            {m: c.substitute_n(n_value) for m, c in self._terms.items()},
            self.group, self.trunc)

    def t_coefficient(self, t_deg: int) -> "PowerSumPoly":
        """Extract the coefficient of t**t_deg as a t-free polynomial."""
        return PowerSumPoly(
            {m: c.t_coefficient(t_deg) for m, c in self._terms.items()},
            self.group, self.trunc)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PowerSumPoly):
            return NotImplemented
        return self.group is other.group and self._terms == other._terms

    def __hash__(self):  # pragma: no cover
        raise TypeError("PowerSumPoly is not hashable")

    # -- rendering --------------------------------------------------------
    def render(self) -> str:
        if not self._terms:
            return "0"
        parts = []
        for mono, coeff in self.items():
            cs = coeff.render()
            if mono is ONE or not mono.letters:
                parts.append(cs if "+" not in cs and "- " not in cs
                             else f"({cs})")
                continue
            if cs == "1":
                parts.append(mono.render())
            elif cs == "-1":
                parts.append(f"-{mono.render()}")
            elif ("+" in cs) or (" - " in cs) or ("*" in cs and cs.count("*") > 1):
                parts.append(f"({cs})*{mono.render()}")
            else:
                parts.append(f"{cs}*{mono.render()}")
        out = " + ".join(parts)
        return out.replace("+ -", "- ")

    def __repr__(self) -> str:
        return f"PowerSumPoly[{self.group.value}]({self.render()})"


# ---------------------------------------------------------------------------
# Laplacian on the restricted generator set and first-order heat action.
# ---------------------------------------------------------------------------

def _letter_sum(group: Group, indices: Iterable[int], trunc: int,
                conjugated: bool = False) -> PowerSumPoly:
    out = PowerSumPoly.zero(group, trunc)
    for k in indices:
        out = out + PowerSumPoly.letter(group, k, conjugated=conjugated,
                                        trunc=trunc)
    return out


def _pair_sum(group: Group, j: int, trunc: int,
              conjugated: bool = False) -> PowerSumPoly:
    """Sum over 1 <= l < j of p_l * p_{j-l} (each ordered pair once)."""
    out = PowerSumPoly.zero(group, trunc)
    for l in range(1, j):
        out = out + (PowerSumPoly.letter(group, l, conjugated=conjugated,
                                         trunc=trunc)
                     * PowerSumPoly.letter(group, j - l, conjugated=conjugated,
                                           trunc=trunc))
    return out


def _reflect_sum(group: Group, j: int, trunc: int,
                 conjugated: bool = False) -> PowerSumPoly:
    """Sum over 1 <= l < j of the normalized letter with raw index 2l - j."""
    out = PowerSumPoly.zero(group, trunc)
    for l in range(1, j):
        out = out + PowerSumPoly.letter(group, 2 * l - j,
                                        conjugated=conjugated, trunc=trunc)
    return out


def _delta_single(group: Group, j: int, trunc: int,
                  conjugated: bool) -> PowerSumPoly:
    p_j = PowerSumPoly.letter(group, j, conjugated=conjugated, trunc=trunc)
    if group is Group.U:
        rate = CoeffPoly.n_term(-j, trunc)
        return p_j * rate - Fraction(j) * _pair_sum(group, j, trunc, conjugated)
    half_j = Fraction(j, 2)
    if group is Group.SO:
        # -(n-1)j/2 * p_j - j/2 * sum p_{l,j-l} + j/2 * sum p_{2l-j}
        rate = CoeffPoly({(1, 0): -half_j, (0, 0): half_j}, trunc)
        return (p_j * rate
                - half_j * _pair_sum(group, j, trunc)
                + half_j * _reflect_sum(group, j, trunc))
    # USp: -(2n+1)j/2 * p_j - j/2 * sum p_{2l-j} - j/2 * sum p_{l,j-l}
    rate = CoeffPoly({(1, 0): -2 * half_j, (0, 0): -half_j}, trunc)
    return (p_j * rate
            - half_j * _reflect_sum(group, j, trunc)
            - half_j * _pair_sum(group, j, trunc))


def _delta_equal_pair(group: Group, j: int, trunc: int,
                      conjugated: bool) -> PowerSumPoly:
    p_j = PowerSumPoly.letter(group, j, conjugated=conjugated, trunc=trunc)
    p_jj = p_j * p_j
    p_2j = PowerSumPoly.letter(group, 2 * j, conjugated=conjugated, trunc=trunc)
    jf = Fraction(j)
    if group is Group.U:
        # -2nj p_{j,j} - 2j^2 p_{2j} - 2j p_j sum p_{l,j-l}
        return (p_jj * CoeffPoly.n_term(-2 * jf, trunc)
                - 2 * jf * jf * p_2j
                - 2 * jf * p_j * _pair_sum(group, j, trunc, conjugated))
    if group is Group.SO:
        # -(n-1)j p_{j,j} - j^2 p_{2j} - j p_j sum p_{l,j-l}
        #   + j p_j sum p_{2l-j} + j^2 n
        return (p_jj * CoeffPoly({(1, 0): -jf, (0, 0): jf}, trunc)
                - jf * jf * p_2j
                - jf * p_j * _pair_sum(group, j, trunc)
                + jf * p_j * _reflect_sum(group, j, trunc)
                + PowerSumPoly.const(CoeffPoly.n_term(jf * jf, trunc),
                                     group, trunc))
    # USp: -(2n+1)j p_{j,j} - j^2 p_{2j} - j p_j sum p_{2l-j}
    #      - j p_j sum p_{l,j-l} + 2j^2 n
    return (p_jj * CoeffPoly({(1, 0): -2 * jf, (0, 0): -jf}, trunc)
            - jf * jf * p_2j
            - jf * p_j * _reflect_sum(group, j, trunc)
            - jf * p_j * _pair_sum(group, j, trunc)
            + PowerSumPoly.const(CoeffPoly.n_term(2 * jf * jf, trunc),
                                 group, trunc))


def _delta_mixed_pair(group: Group, j: int, trunc: int) -> PowerSumPoly:
    # 2j^2 n - 2nj p_j conj(p_j) - j p_j sum conj(p_{l,j-l})
    #        - j conj(p_j) sum p_{l,j-l}
    jf = Fraction(j)
    p_j = PowerSumPoly.letter(group, j, trunc=trunc)
    p_j_bar = PowerSumPoly.letter(group, j, conjugated=True, trunc=trunc)
    return (PowerSumPoly.const(CoeffPoly.n_term(2 * jf * jf, trunc),
                               group, trunc)
            + (p_j * p_j_bar) * CoeffPoly.n_term(-2 * jf, trunc)
            - jf * p_j * _pair_sum(group, j, trunc, conjugated=True)
            - jf * p_j_bar * _pair_sum(group, j, trunc, conjugated=False))


def _laplacian_monomial(mono: Monomial, group: Group,
                        trunc: int) -> PowerSumPoly:
    letters = mono.letters
    if len(letters) == 0:
        return PowerSumPoly.zero(group, trunc)
    if len(letters) == 1:
        (l,) = letters
        return _delta_single(group, l.index, trunc, l.conjugated)
    if len(letters) == 2:
        l1, l2 = letters
        if l1.index != l2.index:
            raise OutsideLaplacianDomainError(
                f"{mono.render()} is outside the restricted Laplacian domain "
                "(only 1, p_j, p_{j,j} and their U conjugates / mixed pair)")
        if l1.conjugated == l2.conjugated:
            return _delta_equal_pair(group, l1.index, trunc, l1.conjugated)
        return _delta_mixed_pair(group, l1.index, trunc)
    raise OutsideLaplacianDomainError(
        f"{mono.render()} is outside the restricted Laplacian domain")


def laplacian(f: PowerSumPoly) -> PowerSumPoly:
    """Group Laplacian of f, extended linearly over the term map."""
    out = PowerSumPoly.zero(f.group, f.trunc)
    for mono, coeff in f.items():
        out = out + _laplacian_monomial(mono, f.group, f.trunc) * coeff
    return out


def heat_first_order(f: PowerSumPoly, order: int = 1) -> PowerSumPoly:
    """Apply the heat action to first order in t: f + t * laplacian(f).

    Orders >= 2 are rejected: the second Laplacian power leaves the
    restricted domain, so higher orders cannot be formed exactly here.
    """
    if order >= 2:
        raise UnsupportedHeatOrderError(
            "heat action is only supported to first order in t")
    if order == 0:
        return f
    if f.trunc < 1:
        raise UnsupportedHeatOrderError(
            "first-order heat action needs truncation order >= 1")
    return f + laplacian(f) * CoeffPoly.t(f.trunc)

"""Exact algebra of vertex-operator exponent coefficient functions.

A mode function g(t) is the coefficient of the oscillator a(t) in an
exponent exp{ integral g(t) a(t) dt }, split into t>0 and t<0 branches.
Terms live in a small grammar: Gaussian-rational coefficients times an
integer power of hbar, exponential tilts e^{alpha*hbar*t}, spectral phases
e^{-i(u + i*gamma*hbar)t}, and integer powers of sinh(beta*hbar*t).

Equality is decided through a canonical form: each branch embeds into the
field of Laurent rationals in zeta = e^{hbar*t/(2L)}, L the lcm of all slope
and shift denominators.  Two mode functions are equal iff their reduced
Laurent rationals coincide on a common lattice, which is sound and complete
for this grammar (a rational function of zeta vanishing on an interval of
the positive axis vanishes identically).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import ExcludedLevel, MixedSpectralArguments, NonMeromorphicProduct
from .exact import GR, LaurentPoly, LaurentRational, as_fraction

__all__ = [
    "AlgebraParams", "Kernel", "ExpTrigTerm", "ModeFunction",
    "canonicalize", "shift_argument", "equals",
]


@dataclass(frozen=True)
class AlgebraParams:
    """Level k (positive rational, k not in {0, -2}) and deformation hbar > 0."""

    k: Fraction
    hbar: Fraction = Fraction(1)

    def __post_init__(self):
        k = as_fraction(self.k)
        hbar = as_fraction(self.hbar)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "hbar", hbar)
        if k == 0 or k == -2:
            raise ExcludedLevel(f"level k={k} is excluded")
        if k < 0:
            raise ExcludedLevel(f"level k={k} must be positive")
        if hbar <= 0:
            raise ValueError("hbar must be positive")

    @property
    def hbar_float(self) -> float:
        return float(self.hbar)


@dataclass(frozen=True)
class Kernel:
    """Commutator density sign * sinh(hbar t) sinh(slope_b * hbar t) / (hbar^2 t).

    The sinh-product numerator is even in t; the full density, carrying the
    1/t divisor, is odd, as the antisymmetry of a commutator requires.
    """

    family: str
    sign: int
    slope_b: Fraction

    def __post_init__(self):
        object.__setattr__(self, "slope_b", as_fraction(self.slope_b))
        if self.sign not in (1, -1):
            raise ValueError("kernel sign must be +1 or -1")
        if self.slope_b <= 0:
            raise ValueError("kernel slope must be positive")

    @property
    def slope_a(self) -> Fraction:
        return Fraction(1)

    def sinh_factors(self) -> tuple[tuple[Fraction, int], ...]:
        if self.slope_b == self.slope_a:
            return ((self.slope_a, 2),)
        return tuple(sorted(((self.slope_a, 1), (self.slope_b, 1))))

    def small_t_linear_coeff(self) -> Fraction:
        """Limit of density/t as t->0, in units of 1/hbar^0 (t in 1/hbar units)."""
        return self.sign * self.slope_a * self.slope_b

    def numerator_laurent(self, lattice: int) -> LaurentPoly:
        p = LaurentPoly.one()
        for beta, e in self.sinh_factors():
            p = p * _sinh_laurent(beta, lattice, e)
        return p.scale(self.sign)

    def numerator_is_even(self) -> bool:
        lat = _lcm(self.slope_a.denominator, self.slope_b.denominator)
        num = self.numerator_laurent(lat)
        return num == num.substitute_inverse()

    def eval_density(self, t: float, hbar: float) -> float:
        return (self.sign * math.sinh(hbar * t)
                * math.sinh(float(self.slope_b) * hbar * t) / (hbar * hbar * t))


def _lcm(*xs: int) -> int:
    out = 1
    for x in xs:
        out = out * x // math.gcd(out, x)
    return out


def _sinh_laurent(beta: Fraction, lattice: int, power: int = 1) -> LaurentPoly:
    """sinh(beta*hbar*t) as a Laurent polynomial in zeta = e^{hbar t/(2 lattice)}."""
    e = beta * 2 * lattice
    if e.denominator != 1:
        raise NonMeromorphicProduct(f"slope {beta} not on lattice 1/{lattice}")
    base = LaurentPoly({int(e): GR(Fraction(1, 2)), -int(e): GR(Fraction(-1, 2))})
    out = LaurentPoly.one()
    for _ in range(abs(power)):
        out = out * base
    return out


@dataclass(frozen=True)
class ExpTrigTerm:
    """One grammar term:

        coeff * hbar^hbar_power * e^{shift*hbar*t}
              * prod_j sinh(beta_j*hbar*t)^{e_j} * e^{-i(u + i*spectral_shift*hbar)t}

    Slopes are normalized positive at construction (sign absorbed into coeff),
    merged and kept sorted.
    """

    coeff: GR
    hbar_power: int = 1
    shift: Fraction = Fraction(0)
    spectral_shift: Fraction = Fraction(0)
    sinh_factors: tuple[tuple[Fraction, int], ...] = ()

    def __post_init__(self):
        coeff = self.coeff if isinstance(self.coeff, GR) else GR.of(self.coeff)
        merged: dict[Fraction, int] = {}
        for beta, e in self.sinh_factors:
            beta = as_fraction(beta)
            e = int(e)
            if beta == 0:
                raise ValueError("sinh slope must be nonzero")
            if beta < 0:
                beta = -beta
                if e % 2:
                    coeff = -coeff
            merged[beta] = merged.get(beta, 0) + e
        factors = tuple(sorted((b, e) for b, e in merged.items() if e))
        object.__setattr__(self, "coeff", coeff)
        object.__setattr__(self, "shift", as_fraction(self.shift))
        object.__setattr__(self, "spectral_shift", as_fraction(self.spectral_shift))
        object.__setattr__(self, "sinh_factors", factors)

    def validate_grammar(self) -> None:
        for _, e in self.sinh_factors:
            if e not in (-2, -1, 1, 2):
                raise ValueError(f"sinh exponent {e} outside grammar range")

    def tilt(self) -> Fraction:
        """Net exponential tilt (shift + spectral shift), in hbar*t units."""
        return self.shift + self.spectral_shift

    def max_growth(self) -> Fraction:
        """Largest exponential slope of the term, in hbar*t units."""
        g = self.tilt()
        for beta, e in self.sinh_factors:
            g += e * beta
        return g

    def denominators(self):
        yield self.shift.denominator
        yield self.spectral_shift.denominator
        for beta, _ in self.sinh_factors:
            yield beta.denominator

    def laurent(self, lattice: int) -> LaurentRational:
        e = (self.shift + self.spectral_shift) * 2 * lattice
        if e.denominator != 1:
            raise NonMeromorphicProduct(f"tilt {self.tilt()} not on lattice 1/{lattice}")
        num = LaurentPoly.monomial(self.coeff, int(e))
        den = LaurentPoly.one()
        for beta, p in self.sinh_factors:
            block = _sinh_laurent(beta, lattice, p)
            if p > 0:
                num = num * block
            else:
                den = den * block
        return LaurentRational(num, den)

    def reflected(self) -> "ExpTrigTerm":
        """The term evaluated at -t, re-expressed for t > 0."""
        coeff = self.coeff
        for _, e in self.sinh_factors:
            if e % 2:
                coeff = -coeff
        return ExpTrigTerm(coeff, self.hbar_power, -self.shift,
                           -self.spectral_shift, self.sinh_factors)

    def eval(self, t: float, hbar: float) -> complex:
        """Numeric value at real t, spectral phase e^{-iut} omitted (u = 0)."""
        v = complex(self.coeff) * hbar ** self.hbar_power
        v *= math.exp(float(self.tilt()) * hbar * t)
        for beta, e in self.sinh_factors:
            v *= math.sinh(float(beta) * hbar * t) ** e
        return v


class ModeFunction:
    """Exponent coefficient function with separate t>0 and t<0 branches."""

    __slots__ = ("variable", "positive_branch", "negative_branch", "_canon")

    def __init__(self, positive_branch=(), negative_branch=(), variable="u"):
        self.variable = variable
        self.positive_branch = tuple(positive_branch)
        self.negative_branch = tuple(negative_branch)
        self._canon = None

    @staticmethod
    def zero(variable="u") -> "ModeFunction":
        return ModeFunction((), (), variable)

    def is_structurally_zero(self) -> bool:
        return not self.positive_branch and not self.negative_branch

    def __add__(self, other: "ModeFunction") -> "ModeFunction":
        if other.is_structurally_zero():
            return self
        if self.is_structurally_zero():
            return other
        if self.variable != other.variable:
            raise MixedSpectralArguments(
                f"cannot mix spectral variables {self.variable} and {other.variable}")
        return ModeFunction(self.positive_branch + other.positive_branch,
                            self.negative_branch + other.negative_branch,
                            self.variable)

    def __neg__(self) -> "ModeFunction":
        return self.scale(GR(Fraction(-1)))

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s) -> "ModeFunction":
        s = GR.of(s)
        def sc(terms):
            return tuple(ExpTrigTerm(t.coeff * s, t.hbar_power, t.shift,
                                     t.spectral_shift, t.sinh_factors)
                         for t in terms)
        return ModeFunction(sc(self.positive_branch), sc(self.negative_branch),
                            self.variable)

    def lattice(self) -> int:
        dens = [1]
        for t in self.positive_branch + self.negative_branch:
            dens.extend(t.denominators())
        return _lcm(*dens)

    def canonical(self, lattice: int | None = None):
        """Canonical form: per branch, {hbar_power: reduced LaurentRational}."""
        own = self.lattice()
        if lattice is None:
            lattice = own
        elif lattice % own:
            raise ValueError("requested lattice does not refine this function's lattice")
        if self._canon is not None and self._canon[0] == lattice:
            return self._canon
        branches = []
        for terms in (self.positive_branch, self.negative_branch):
            acc: dict[int, LaurentRational] = {}
            for t in terms:
                lr = t.laurent(lattice)
                if lr.is_zero():
                    continue
                prev = acc.get(t.hbar_power)
                acc[t.hbar_power] = lr if prev is None else prev + lr
            branches.append({p: lr for p, lr in acc.items() if not lr.is_zero()})
        canon = (lattice, branches[0], branches[1])
        if lattice == own:
            self._canon = canon
        return canon

    def eval_branch(self, t: float, hbar: float) -> complex:
        """Numeric value of the branch containing t (u = 0 convention)."""
        terms = self.positive_branch if t > 0 else self.negative_branch
        return sum((term.eval(t, hbar) for term in terms), 0j)

    def __repr__(self):
        return (f"ModeFunction({self.variable}; +:{list(self.positive_branch)!r}, "
                f"-:{list(self.negative_branch)!r})")


def canonicalize(f: ModeFunction, params: AlgebraParams | None = None) -> ModeFunction:
    """Return an equivalent ModeFunction with its canonical form computed.

    Idempotent; the term lists are normalized (zero terms dropped, stable
    order) and the Laurent-rational quotients are attached for inspection
    through .canonical().
    """
    def norm(terms):
        kept = [t for t in terms if t.coeff]
        kept.sort(key=lambda t: (t.hbar_power, t.shift, t.spectral_shift,
                                 t.sinh_factors, t.coeff.re, t.coeff.im))
        return tuple(kept)

    out = ModeFunction(norm(f.positive_branch), norm(f.negative_branch), f.variable)
    out.canonical()
    return out


def shift_argument(f: ModeFunction, delta) -> ModeFunction:
    """Replace u by u + i*delta*hbar, i.e. multiply every term by e^{delta*hbar*t}.

    Additive in delta; shift_argument(f, 0) is f.
    """
    delta = as_fraction(delta)
    if delta == 0:
        return f
    def sh(terms):
        return tuple(ExpTrigTerm(t.coeff, t.hbar_power, t.shift,
                                 t.spectral_shift + delta, t.sinh_factors)
                     for t in terms)
    return ModeFunction(sh(f.positive_branch), sh(f.negative_branch), f.variable)


def equals(f: ModeFunction, g: ModeFunction, params: AlgebraParams | None = None) -> bool:
    """Exact equality of mode functions via canonical forms on a joint lattice."""
    if f.variable != g.variable:
        raise MixedSpectralArguments(
            f"comparing functions of {f.variable} and {g.variable}")
    joint = _lcm(f.lattice(), g.lattice())
    _, fp, fn = f.canonical(joint)
    _, gp, gn = g.canonical(joint)
    return fp == gp and fn == gn

"""Exact arithmetic helpers: Gaussian rationals, Laurent polynomials and
Laurent rational functions over them, and exact multiplicative constants.

All symbolic decisions elsewhere in the package (equality of exponents,
cancellation of Gamma factors, divergence matching) reduce to arithmetic in
these types, so they must be exact.  Floating point enters only at
evaluation time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

def as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    raise TypeError(f"cannot coerce {x!r} to Fraction")


@dataclass(frozen=True)
class GR:
    """Gaussian rational a + b*i with exact Fraction components."""

    re: Fraction = Fraction(0)
    im: Fraction = Fraction(0)

    @staticmethod
    def of(x) -> "GR":
        if isinstance(x, GR):
            return x
        if isinstance(x, complex):
            raise TypeError("build GR from exact values, not floats")
        return GR(as_fraction(x), Fraction(0))

    def __add__(self, other):
        o = GR.of(other)
        return GR(self.re + o.re, self.im + o.im)

    __radd__ = __add__

    def __neg__(self):
        return GR(-self.re, -self.im)

    def __sub__(self, other):
        return self + (-GR.of(other))

    def __rsub__(self, other):
        return GR.of(other) + (-self)

    def __mul__(self, other):
        o = GR.of(other)
        return GR(self.re * o.re - self.im * o.im, self.re * o.im + self.im * o.re)

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = GR.of(other)
        n = o.re * o.re + o.im * o.im
        if n == 0:
            raise ZeroDivisionError("division by zero GR")
        return GR((self.re * o.re + self.im * o.im) / n,
                  (self.im * o.re - self.re * o.im) / n)

    def __rtruediv__(self, other):
        return GR.of(other) / self

    def conj(self) -> "GR":
        return GR(self.re, -self.im)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def is_real(self) -> bool:
        return self.im == 0

    def __bool__(self):
        return not self.is_zero()

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if self.im == 0:
            return str(self.re)
        if self.re == 0:
            return f"{self.im}*i"
        sign = "+" if self.im > 0 else "-"
        return f"({self.re}{sign}{abs(self.im)}*i)"


GR_ZERO = GR()
GR_ONE = GR(Fraction(1))
GR_I = GR(Fraction(0), Fraction(1))


class LaurentPoly:
    """Laurent polynomial in one variable with GR coefficients.

    Stored as {exponent: coefficient} with zero coefficients dropped.
    """

    __slots__ = ("c",)

    def __init__(self, coeffs: dict[int, GR] | None = None):
        self.c: dict[int, GR] = {}
        if coeffs:
            for e, v in coeffs.items():
                if v:
                    self.c[int(e)] = v

    @staticmethod
    def monomial(coeff, exponent: int) -> "LaurentPoly":
        return LaurentPoly({exponent: GR.of(coeff)})

    @staticmethod
    def zero() -> "LaurentPoly":
        return LaurentPoly()

    @staticmethod
    def one() -> "LaurentPoly":
        return LaurentPoly({0: GR_ONE})

    def is_zero(self) -> bool:
        return not self.c

    def __eq__(self, other):
        return isinstance(other, LaurentPoly) and self.c == other.c

    def __hash__(self):
        return hash(frozenset(self.c.items()))

    def copy(self) -> "LaurentPoly":
        p = LaurentPoly()
        p.c = dict(self.c)
        return p

    def __add__(self, other: "LaurentPoly") -> "LaurentPoly":
        out = dict(self.c)
        for e, v in other.c.items():
            s = out.get(e, GR_ZERO) + v
            if s:
                out[e] = s
            else:
                out.pop(e, None)
        p = LaurentPoly()
        p.c = out
        return p

    def __neg__(self) -> "LaurentPoly":
        return LaurentPoly({e: -v for e, v in self.c.items()})

    def __sub__(self, other: "LaurentPoly") -> "LaurentPoly":
        return self + (-other)

    def __mul__(self, other: "LaurentPoly") -> "LaurentPoly":
        out: dict[int, GR] = {}
        for e1, v1 in self.c.items():
            for e2, v2 in other.c.items():
                e = e1 + e2
                s = out.get(e, GR_ZERO) + v1 * v2
                if s:
                    out[e] = s
                else:
                    out.pop(e, None)
        p = LaurentPoly()
        p.c = out
        return p

    def scale(self, k) -> "LaurentPoly":
        k = GR.of(k)
        if not k:
            return LaurentPoly()
        return LaurentPoly({e: v * k for e, v in self.c.items()})

    def min_exp(self) -> int:
        return min(self.c) if self.c else 0

    def max_exp(self) -> int:
        return max(self.c) if self.c else 0

    def substitute_inverse(self) -> "LaurentPoly":
        """zeta -> 1/zeta."""
        return LaurentPoly({-e: v for e, v in self.c.items()})

    def eval_at_one(self) -> GR:
        s = GR_ZERO
        for v in self.c.values():
            s = s + v
        return s

    def taylor_at_one(self, order: int) -> list[GR]:
        """Coefficients of sum_m c_m e^{m s} expanded in s up to s^order.

        Used for exact small-argument expansions: coefficient r is
        (1/r!) sum_m c_m m^r.
        """
        out = []
        fact = 1
        for r in range(order + 1):
            if r:
                fact *= r
            acc = GR_ZERO
            for e, v in self.c.items():
                acc = acc + v * (e ** r)
            out.append(acc / fact)
        return out

    def factor_zeta_minus_one(self) -> tuple["LaurentPoly", int]:
        """Write self = (zeta - 1)^m * q with q(1) != 0; return (q, m)."""
        if self.is_zero():
            return LaurentPoly(), 0
        p = self.copy()
        m = 0
        while not p.eval_at_one():
            # synthetic division by (zeta - 1) on the ordinary-poly part
            lo = p.min_exp()
            dense = p.to_dense(lo)
            # divide dense polynomial (in zeta) by (zeta - 1)
            n = len(dense)
            out = [GR_ZERO] * (n - 1)
            acc = GR_ZERO
            for i in range(n - 1, 0, -1):
                acc = acc + dense[i]
                out[i - 1] = acc
            p = LaurentPoly({lo + i: v for i, v in enumerate(out) if v})
            m += 1
        return p, m

    def to_dense(self, lo: int | None = None) -> list[GR]:
        """Dense coefficient list starting at exponent lo (default min_exp)."""
        if self.is_zero():
            return [GR_ZERO]
        if lo is None:
            lo = self.min_exp()
        out = [GR_ZERO] * (self.max_exp() - lo + 1)
        for e, v in self.c.items():
            out[e - lo] = v
        return out

    def eval_numeric(self, logz: complex) -> complex:
        """Evaluate at zeta = exp(logz), numerically."""
        s = 0j
        for e, v in self.c.items():
            s += complex(v) * _cexp(e * logz)
        return s

    def __repr__(self):
        if self.is_zero():
            return "0"
        return " + ".join(f"{v!r}*Z^{e}" for e, v in sorted(self.c.items()))


def _cexp(z: complex) -> complex:
    # guard against overflow for very negative real parts
    if z.real < -745.0:
        return 0j
    return complex(math.exp(z.real) * math.cos(z.imag),
                   math.exp(z.real) * math.sin(z.imag))


def _poly_divmod(num: list[GR], den: list[GR]) -> tuple[list[GR], list[GR]]:
    """Ordinary dense polynomial division, coefficients ascending."""
    num = list(num)
    dn = len(den) - 1
    while den[dn].is_zero():
        dn -= 1
    q = [GR_ZERO] * max(len(num) - dn, 1)
    for i in range(len(num) - 1, dn - 1, -1):
        coeff = num[i] / den[dn]
        if coeff:
            q[i - dn] = coeff
            for j in range(dn + 1):
                num[i - dn + j] = num[i - dn + j] - coeff * den[j]
    while len(num) > 1 and num[-1].is_zero():
        num.pop()
    return q, num


def poly_gcd(a: list[GR], b: list[GR]) -> list[GR]:
    """Monic gcd of dense ordinary polynomials over the Gaussian rationals."""
    a = [v for v in a]
    b = [v for v in b]
    while any(v for v in b):
        _, r = _poly_divmod(a, b)
        a, b = b, r
    # normalize monic
    lead = a[-1]
    for i, v in enumerate(a):
        a[i] = v / lead
    return a


class LaurentRational:
    """Quotient of Laurent polynomials, kept reduced.

    Normalization: gcd of numerator and denominator removed, denominator
    shifted to minimum exponent 0 with leading (highest) coefficient 1.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: LaurentPoly, den: LaurentPoly | None = None, reduce: bool = True):
        if den is None:
            den = LaurentPoly.one()
        if den.is_zero():
            raise ZeroDivisionError("LaurentRational with zero denominator")
        if num.is_zero():
            self.num = LaurentPoly()
            self.den = LaurentPoly.one()
            return
        if reduce:
            num, den = self._reduce(num, den)
        self.num, self.den = num, den

    @staticmethod
    def _reduce(num: LaurentPoly, den: LaurentPoly) -> tuple[LaurentPoly, LaurentPoly]:
        # shift both to ordinary polynomials
        nlo, dlo = num.min_exp(), den.min_exp()
        ndense = num.to_dense(nlo)
        ddense = den.to_dense(dlo)
        g = poly_gcd(ndense, ddense)
        if len(g) > 1:
            ndense, _ = _poly_divmod(ndense, g)
            ddense, _ = _poly_divmod(ddense, g)
        # rebuild, normalizing: denominator min exponent 0, top coeff 1
        num2 = LaurentPoly({nlo + i: v for i, v in enumerate(ndense) if v})
        den2 = LaurentPoly({dlo + i: v for i, v in enumerate(ddense) if v})
        shift = den2.min_exp()
        den2 = LaurentPoly({e - shift: v for e, v in den2.c.items()})
        num2 = LaurentPoly({e - shift: v for e, v in num2.c.items()})
        lead = den2.c[den2.max_exp()]
        den2 = den2.scale(GR_ONE / lead)
        num2 = num2.scale(GR_ONE / lead)
        # keep numerator exponents honest (no further shift)
        return num2, den2

    @staticmethod
    def zero() -> "LaurentRational":
        return LaurentRational(LaurentPoly())

    def is_zero(self) -> bool:
        return self.num.is_zero()

    def __eq__(self, other):
        if not isinstance(other, LaurentRational):
            return NotImplemented
        return self.num == other.num and self.den == other.den

    def __hash__(self):
        return hash((self.num, self.den))

    def __add__(self, other: "LaurentRational") -> "LaurentRational":
        return LaurentRational(self.num * other.den + other.num * self.den,
                               self.den * other.den)

    def __neg__(self):
        r = LaurentRational.zero()
        r.num, r.den = -self.num, self.den
        return r

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "LaurentRational") -> "LaurentRational":
        return LaurentRational(self.num * other.num, self.den * other.den)

    def scale(self, k) -> "LaurentRational":
        r = LaurentRational.zero()
        r.num, r.den = self.num.scale(k), self.den
        if r.num.is_zero():
            r.den = LaurentPoly.one()
        return r

    def substitute_inverse(self) -> "LaurentRational":
        return LaurentRational(self.num.substitute_inverse(),
                               self.den.substitute_inverse())

    def rescale_lattice(self, m: int) -> "LaurentRational":
        """Refine the lattice: zeta -> zeta^m (m positive integer)."""
        return LaurentRational(
            LaurentPoly({e * m: v for e, v in self.num.c.items()}),
            LaurentPoly({e * m: v for e, v in self.den.c.items()}),
            reduce=False,
        )

    def limit_at_one(self) -> GR:
        """lim_{zeta->1} of the rational function; raises if it diverges."""
        n, mn = self.num.factor_zeta_minus_one()
        d, md = self.den.factor_zeta_minus_one()
        if mn < md:
            raise ZeroDivisionError("pole at zeta = 1")
        if mn > md:
            return GR_ZERO
        return n.eval_at_one() / d.eval_at_one()

    def eval_numeric(self, logz: complex) -> complex:
        return self.num.eval_numeric(logz) / self.den.eval_numeric(logz)

    def __repr__(self):
        if self.den == LaurentPoly.one():
            return repr(self.num)
        return f"({self.num!r}) / ({self.den!r})"


# ---------------------------------------------------------------------------
# Rational functions of the level parameter k (for the definition DSL, where
# expressions must stay symbolic until k is bound).

class KRat:
    """Rational function of k with Fraction coefficients, degree kept small."""

    __slots__ = ("num", "den")

    def __init__(self, num: dict[int, Fraction], den: dict[int, Fraction] | None = None):
        self.num = {e: v for e, v in num.items() if v}
        self.den = {e: v for e, v in (den or {0: Fraction(1)}).items() if v}
        if not self.den:
            raise ZeroDivisionError("KRat zero denominator")
        if not self.num:
            self.den = {0: Fraction(1)}

    @staticmethod
    def const(x) -> "KRat":
        return KRat({0: as_fraction(x)})

    @staticmethod
    def k() -> "KRat":
        return KRat({1: Fraction(1)})

    def _mul_poly(a, b):
        out: dict[int, Fraction] = {}
        for e1, v1 in a.items():
            for e2, v2 in b.items():
                out[e1 + e2] = out.get(e1 + e2, Fraction(0)) + v1 * v2
        return {e: v for e, v in out.items() if v}

    def __add__(self, other: "KRat") -> "KRat":
        n1 = KRat._mul_poly(self.num, other.den)
        n2 = KRat._mul_poly(other.num, self.den)
        num = dict(n1)
        for e, v in n2.items():
            num[e] = num.get(e, Fraction(0)) + v
        return KRat(num, KRat._mul_poly(self.den, other.den))

    def __neg__(self):
        return KRat({e: -v for e, v in self.num.items()}, dict(self.den))

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other: "KRat") -> "KRat":
        return KRat(KRat._mul_poly(self.num, other.num),
                    KRat._mul_poly(self.den, other.den))

    def __truediv__(self, other: "KRat") -> "KRat":
        if not other.num:
            raise ZeroDivisionError("KRat division by zero")
        return KRat(KRat._mul_poly(self.num, other.den),
                    KRat._mul_poly(self.den, other.num))

    def bind(self, k: Fraction) -> Fraction:
        n = sum((v * k ** e for e, v in self.num.items()), Fraction(0))
        d = sum((v * k ** e for e, v in self.den.items()), Fraction(0))
        if d == 0:
            raise ZeroDivisionError(f"KRat denominator vanishes at k={k}")
        return n / d

    def __repr__(self):
        def side(p):
            return " + ".join(
                (f"{v}" if e == 0 else (f"{v}*k" if e == 1 else f"{v}*k^{e}"))
                for e, v in sorted(p.items()))
        if self.den == {0: Fraction(1)}:
            return side(self.num) or "0"
        return f"({side(self.num)})/({side(self.den)})"


# ---------------------------------------------------------------------------
# Exact multiplicative constants of the form
#     mult * i^(phase/2 pi units) * prod_p p^{q_p} * hbar^{q_h}
# These arise from Gamma-shift normalization ((s*hbar)^{+-1} factors) and
# from the log D regularization terms (D^{sum d_j x_j}).

@dataclass
class ExactConst:
    mult: GR
    # quarter-turn phase units: value includes exp(i*pi/2 * phase)
    phase: Fraction
    primes: dict[int, Fraction]
    hbar_pow: Fraction

    @staticmethod
    def one() -> "ExactConst":
        return ExactConst(GR_ONE, Fraction(0), {}, Fraction(0))

    def copy(self) -> "ExactConst":
        return ExactConst(self.mult, self.phase, dict(self.primes), self.hbar_pow)

    def times_gr(self, g: GR) -> "ExactConst":
        out = self.copy()
        out.mult = out.mult * g
        return out

    def times_base(self, base: GR, hbar_pow: int, exponent: Fraction) -> "ExactConst":
        """Multiply by (base * hbar^hbar_pow)^exponent, base a Gaussian rational
        of the form i^j * q with q a positive rational."""
        if exponent == 0:
            return self.copy()
        q, j = _split_unit(base)
        out = self.copy()
        out.phase += Fraction(j) * exponent
        out.hbar_pow += Fraction(hbar_pow) * exponent
        for p, e in _factor_fraction(q).items():
            out.primes[p] = out.primes.get(p, Fraction(0)) + Fraction(e) * exponent
            if not out.primes[p]:
                del out.primes[p]
        return out

    def times(self, other: "ExactConst") -> "ExactConst":
        out = self.copy()
        out.mult = out.mult * other.mult
        out.phase += other.phase
        out.hbar_pow += other.hbar_pow
        for p, e in other.primes.items():
            out.primes[p] = out.primes.get(p, Fraction(0)) + e
            if not out.primes[p]:
                del out.primes[p]
        return out

    def inverse(self) -> "ExactConst":
        out = ExactConst(GR_ONE / self.mult, -self.phase,
                         {p: -e for p, e in self.primes.items()}, -self.hbar_pow)
        return out

    def wick_rotate(self) -> "ExactConst":
        """hbar -> -i*hbar: each power of hbar contributes a -i phase."""
        out = self.copy()
        # (-i)^{q} = i^{-q} = quarter-turn phase -q
        out.phase -= self.hbar_pow
        return out

    def canonical(self) -> "ExactConst":
        """Fold a unit-times-positive-rational multiplier into phase/primes."""
        try:
            q, j = _split_unit(self.mult)
        except ValueError:
            return self
        out = ExactConst(GR_ONE, self.phase + j, dict(self.primes), self.hbar_pow)
        for p, e in _factor_fraction(q).items():
            out.primes[p] = out.primes.get(p, Fraction(0)) + e
            if not out.primes[p]:
                del out.primes[p]
        return out

    def is_one(self) -> bool:
        c = self.canonical()
        return (c.mult == GR_ONE and c.phase % 4 == 0
                and not c.primes and c.hbar_pow == 0)

    def as_gr(self) -> GR:
        """Exact Gaussian-rational value; requires integer prime powers,
        a quarter-turn phase and no hbar content."""
        if self.hbar_pow != 0:
            raise ValueError("constant carries hbar content")
        if self.phase.denominator != 1:
            raise ValueError("constant phase is not a quarter turn")
        out = self.mult
        unit = [GR_ONE, GR(Fraction(0), Fraction(1)),
                GR(Fraction(-1)), GR(Fraction(0), Fraction(-1))]
        out = out * unit[int(self.phase) % 4]
        for p, e in self.primes.items():
            if e.denominator != 1:
                raise ValueError(f"constant has fractional power of {p}")
            q = Fraction(p) ** int(e)
            out = out * GR(q)
        return out

    def eval(self, hbar: float) -> complex:
        v = complex(self.mult)
        ph = float(self.phase) * math.pi / 2.0
        v *= complex(math.cos(ph), math.sin(ph))
        lg = 0.0
        for p, e in self.primes.items():
            lg += float(e) * math.log(p)
        lg += float(self.hbar_pow) * math.log(hbar)
        return v * math.exp(lg)

    def __eq__(self, other):
        if not isinstance(other, ExactConst):
            return NotImplemented
        a, b = self.canonical(), other.canonical()
        return (a.mult == b.mult and (a.phase - b.phase) % 4 == 0
                and a.primes == b.primes and a.hbar_pow == b.hbar_pow)

    def __repr__(self):
        parts = []
        if self.mult != GR_ONE:
            parts.append(repr(self.mult))
        if self.phase % 4:
            parts.append(f"i^{self.phase}")
        for p, e in sorted(self.primes.items()):
            parts.append(f"{p}^{e}")
        if self.hbar_pow:
            parts.append(f"hbar^{self.hbar_pow}")
        return "*".join(parts) if parts else "1"


def _split_unit(g: GR) -> tuple[Fraction, int]:
    """Write g = i^j * q with q > 0 rational; g must be of that form."""
    if g.im == 0:
        if g.re > 0:
            return g.re, 0
        if g.re < 0:
            return -g.re, 2
    if g.re == 0:
        if g.im > 0:
            return g.im, 1
        if g.im < 0:
            return -g.im, 3
    raise ValueError(f"constant base {g!r} is not of the form i^j * rational")


def _factor_fraction(q: Fraction) -> dict[int, int]:
    out: dict[int, int] = {}
    for n, sgn in ((q.numerator, 1), (q.denominator, -1)):
        n = abs(n)
        d = 2
        while d * d <= n:
            while n % d == 0:
                out[d] = out.get(d, 0) + sgn
                n //= d
            d += 1
        if n > 1:
            out[n] = out.get(n, 0) + sgn
    return {p: e for p, e in out.items() if e}

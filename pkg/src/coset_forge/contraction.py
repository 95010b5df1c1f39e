"""Two-operator contraction integrals and exchange structure functions.

A contraction is the scalar

    <A(u) B(v)> = int_0^inf f(t) g(-t) K(t) dt

with f the t>0 branch of the left exponent, g the t<0 branch of the right
one and K the oscillator commutator density.  The integrand always has the
shape  R(zeta(t)) e^{-iwt} / t  with w = u - v, R an exact Laurent rational
in zeta = e^{hbar t/(2L)}, and at worst a 1/t singularity at the origin.

Two evaluation routes are kept deliberately independent:

  * quad_eval: double-exponential quadrature of the Frullani-regularized
    integrand (the a e^{-t}/t reference term subtracted, a the exact 1/t
    coefficient);
  * closed_form: exact reduction.  After pulling the denominator into a
    single cyclotomic factor 1 - zeta^{-2M}, every numerator monomial is a
    term d e^{-xDt}/(t(1-e^{-Dt})), and Binet's integral for log Gamma gives
    the regularized value  sum_j d_j log Gamma(x_j) + (sum_j d_j x_j) log D
    exactly.  The Gamma arguments are x_j = iw/(s hbar) + shift with exact
    rational scale s and shift.

Exchange factors S with A(u)B(v) = S(u-v) B(v)A(u) are differences of two
contractions; their log divergences must cancel exactly, which is checked
symbolically.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import (DivergenceMismatch, IllPosedContraction, NonTelescoping,
                     OutsideConvergenceStrip, QuadratureNonConvergent)
from .exact import (GR, GR_I, GR_ONE, GR_ZERO, ExactConst, LaurentPoly,
                    LaurentRational, as_fraction, _poly_divmod)
from .modes import AlgebraParams, ExpTrigTerm, Kernel, ModeFunction, _lcm
from .specfun import log_gamma

__all__ = [
    "GammaFactor", "StructureFunction", "ContractionIntegrand",
    "contract", "quad_eval", "closed_form", "exchange_factor",
]


@dataclass(frozen=True)
class GammaFactor:
    """Gamma(iw/(scale*hbar) + shift)^exponent.

    The scale is a Gaussian rational so that reversed (w -> -w) and
    Wick-rotated factors stay in the same representation; the default
    presentation scale is 2, matching x = i(u-v)/(2 hbar).
    """

    scale: GR
    shift: Fraction
    exponent: int

    def argument(self, w: complex, hbar: float) -> complex:
        return 1j * w / (complex(self.scale) * hbar) + float(self.shift)


class StructureFunction:
    """Product of integer powers of linear factors (iw + rho*hbar), Gamma
    factors, an optional exponential-linear term, and an exact constant."""

    __slots__ = ("gammas", "linears", "const", "exp_linear")

    def __init__(self, gammas=None, linears=None, const=None, exp_linear=Fraction(0)):
        # gammas: {(scale GR, shift Fraction): int exponent}
        self.gammas: dict[tuple[GR, Fraction], int] = dict(gammas or {})
        # linears: {rho GR: int exponent} for (iw + rho*hbar)^exponent
        self.linears: dict[GR, int] = dict(linears or {})
        self.const: ExactConst = const if const is not None else ExactConst.one()
        self.exp_linear = as_fraction(exp_linear)

    # -- constructors -----------------------------------------------------
    @staticmethod
    def one() -> "StructureFunction":
        return StructureFunction()

    @staticmethod
    def from_linear(rho, exponent: int = 1) -> "StructureFunction":
        return StructureFunction(linears={GR.of(rho): exponent})

    @staticmethod
    def from_gamma(scale, shift, exponent: int = 1) -> "StructureFunction":
        return StructureFunction(gammas={(GR.of(scale), as_fraction(shift)): exponent})

    @staticmethod
    def from_const_gr(g: GR) -> "StructureFunction":
        return StructureFunction(const=ExactConst.one().times_gr(g))

    # -- algebra -----------------------------------------------------------
    def __mul__(self, other: "StructureFunction") -> "StructureFunction":
        g = dict(self.gammas)
        for key, e in other.gammas.items():
            g[key] = g.get(key, 0) + e
            if not g[key]:
                del g[key]
        l = dict(self.linears)
        for key, e in other.linears.items():
            l[key] = l.get(key, 0) + e
            if not l[key]:
                del l[key]
        return StructureFunction(g, l, self.const.times(other.const),
                                 self.exp_linear + other.exp_linear)

    def inverse(self) -> "StructureFunction":
        return StructureFunction({k: -e for k, e in self.gammas.items()},
                                 {k: -e for k, e in self.linears.items()},
                                 self.const.inverse(), -self.exp_linear)

    def negate_w(self) -> "StructureFunction":
        """Re-express the same function with w replaced by -w."""
        g = {}
        for (s, a), e in self.gammas.items():
            key = (-s, a)
            g[key] = g.get(key, 0) + e
        l = {}
        c = self.const.copy()
        for rho, e in self.linears.items():
            # (i(-w) + rho*hbar) = -(iw - rho*hbar)
            key = -rho
            l[key] = l.get(key, 0) + e
            if e % 2:
                c = c.times_gr(GR.of(-1))
        return StructureFunction(g, l, c, -self.exp_linear)

    def wick_rotate(self) -> "StructureFunction":
        """Substitute hbar -> -i hbar."""
        mi = GR(Fraction(0), Fraction(-1))
        g = {}
        for (s, a), e in self.gammas.items():
            key = (s * mi, a)
            g[key] = g.get(key, 0) + e
        l = {}
        for rho, e in self.linears.items():
            key = rho * mi
            l[key] = l.get(key, 0) + e
        return StructureFunction(g, l, self.const.wick_rotate(), self.exp_linear)

    # -- canonical form ----------------------------------------------------
    def normalize(self) -> "StructureFunction":
        """Merge Gamma factors modulo the recurrence Gamma(x+1) = x Gamma(x).

        Within each (scale, shift mod 1) class the factor is reduced to the
        representative shift in [0,1); integer offsets are emitted as linear
        factors (iw + q*scale*hbar) with exact constants (scale*hbar)^{-1}.
        """
        out = StructureFunction(linears=self.linears, const=self.const,
                                exp_linear=self.exp_linear)
        for (s, a), e in self.gammas.items():
            r = a - math.floor(a)
            n = int(a - r)
            key = (s, r)
            out.gammas[key] = out.gammas.get(key, 0) + e
            if not out.gammas[key]:
                del out.gammas[key]
            js = range(0, n) if n > 0 else range(n, 0)
            sign = 1 if n > 0 else -1
            for j in js:
                q = r + j
                rho = s * GR.of(q)
                out.linears[rho] = out.linears.get(rho, 0) + sign * e
                if not out.linears[rho]:
                    del out.linears[rho]
                out.const = out.const.times_base(s, 1, Fraction(-sign * e))
        out.linears = {k: v for k, v in out.linears.items() if v}
        out.gammas = {k: v for k, v in out.gammas.items() if v}
        return out

    def is_gamma_free(self) -> bool:
        return not self.normalize().gammas

    def is_one(self) -> bool:
        n = self.normalize()
        return (not n.gammas and not n.linears and n.exp_linear == 0
                and n.const.is_one())

    def symbolic_eq(self, other: "StructureFunction") -> bool:
        return (self * other.inverse()).is_one()

    # -- evaluation ----------------------------------------------------------
    def log_eval(self, w: complex, hbar: float) -> complex:
        s = cmath.log(self.const.eval(hbar))
        for (sc, a), e in self.gammas.items():
            s += e * log_gamma(1j * w / (complex(sc) * hbar) + float(a))
        for rho, e in self.linears.items():
            s += e * cmath.log(1j * w + complex(rho) * hbar)
        if self.exp_linear:
            s += float(self.exp_linear) * 1j * w / hbar
        return s

    def eval(self, w: complex, hbar: float) -> complex:
        return cmath.exp(self.log_eval(w, hbar))

    # -- pole bookkeeping ----------------------------------------------------
    def rational_poles(self, hbar: float) -> list[tuple[complex, int]]:
        """Poles coming from linear factors, as (w0, order)."""
        out = []
        for rho, e in self.normalize().linears.items():
            if e < 0:
                out.append((1j * complex(rho) * hbar, -e))
        return out

    def gamma_poles_in_disk(self, hbar: float, radius: float) -> list[complex]:
        out = []
        for (sc, a), e in self.normalize().gammas.items():
            if e <= 0:
                continue
            n = 0
            while True:
                w0 = 1j * (float(n) + float(a)) * complex(sc) * hbar
                if abs(w0) > radius and n > 0:
                    break
                if abs(w0) <= radius:
                    out.append(w0)
                n += 1
                if n > 10000:
                    break
        return out

    def residue_at_simple_pole(self, rho0: GR) -> tuple[GR, int]:
        """Exact residue in w at the simple pole iw = -rho0*hbar of a purely
        rational structure function (Gamma-free after normalization).

        Returns (gr, hbar_power): the residue is gr * hbar^hbar_power times
        the function's exact constant.
        """
        n = self.normalize()
        if n.gammas:
            raise NonTelescoping("residues of Gamma poles are not exact here")
        if n.linears.get(rho0, 0) != -1:
            raise ValueError("not a simple pole of this function")
        # near iw = -rho0 hbar: (iw + rho0 hbar) = i (w - w0), so
        # Res_w = (1/i) prod_{rho != rho0} ((rho - rho0) hbar)^e
        gr = GR_ONE / GR_I
        hpow = 0
        for rho, e in n.linears.items():
            if rho == rho0:
                continue
            base = rho - rho0
            for _ in range(abs(e)):
                gr = gr * base if e > 0 else gr / base
            hpow += e
        return gr, hpow

    def __repr__(self):
        bits = []
        if not self.const.is_one():
            bits.append(repr(self.const))
        for (s, a), e in sorted(self.gammas.items(), key=lambda kv: (repr(kv[0]), kv[1])):
            bits.append(f"Gamma(iw/({s!r}h)+{a})^{e}")
        for rho, e in sorted(self.linears.items(), key=lambda kv: (repr(kv[0]), kv[1])):
            bits.append(f"(iw+{rho!r}h)^{e}")
        if self.exp_linear:
            bits.append(f"exp({self.exp_linear} iw/h)")
        return " * ".join(bits) if bits else "1"

    def describe(self) -> str:
        return repr(self.normalize())


class ContractionIntegrand:
    """Canonical contraction integrand R(zeta) e^{-iwt}/t on (0, inf)."""

    def __init__(self, terms: list[ExpTrigTerm], lattice: int,
                 rational: LaurentRational):
        self.terms = list(terms)
        self.lattice = lattice
        self.rational = rational
        try:
            a = rational.limit_at_one()
        except ZeroDivisionError:
            raise IllPosedContraction(
                "integrand diverges faster than 1/t at the origin")
        if not a.is_real():
            raise IllPosedContraction(f"log-divergence coefficient {a} not real")
        self.log_divergence_coeff: Fraction = a.re
        self._evaluator = None

    def is_zero(self) -> bool:
        return self.rational.is_zero()

    def max_growth(self) -> Fraction:
        """Largest exponential growth rate of R(zeta(t)), in hbar*t units."""
        if self.is_zero():
            return Fraction(-10 ** 9)
        return Fraction(self.rational.num.max_exp() - self.rational.den.max_exp(),
                        2 * self.lattice)

    def strip_bound(self, hbar: float) -> float:
        """Absolute convergence requires Im w < -bound."""
        return float(self.max_growth()) * hbar

    def evaluator(self, hbar: float) -> "_IntegrandEvaluator":
        if self._evaluator is None or self._evaluator.hbar != hbar:
            self._evaluator = _IntegrandEvaluator(self, hbar)
        return self._evaluator


class _IntegrandEvaluator:
    """Vectorized numeric evaluation of the regularized integrand."""

    SERIES_ORDER = 10

    def __init__(self, I: ContractionIntegrand, hbar: float):
        self.hbar = hbar
        self.a = float(I.log_divergence_coeff)
        self.eta = hbar / (2.0 * I.lattice)
        num, den = I.rational.num, I.rational.den
        self.nshift = num.max_exp()
        self.dshift = den.max_exp()
        self.nexp = np.array([e - self.nshift for e in num.c], dtype=float)
        self.ncoef = np.array([complex(v) for v in num.c.values()])
        self.dexp = np.array([e - self.dshift for e in den.c], dtype=float)
        self.dcoef = np.array([complex(v) for v in den.c.values()])
        # exact Taylor coefficients of R(zeta(t)) in powers of (eta t)
        nser = num.taylor_at_one(self.SERIES_ORDER + 4)
        dser = den.taylor_at_one(self.SERIES_ORDER + 4)
        self.series = _series_divide(nser, dser, self.SERIES_ORDER)

    def scale_hint(self) -> float:
        m = max(abs(self.nshift), abs(self.dshift), 1.0)
        return m * self.eta

    def __call__(self, t: np.ndarray, w: complex) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        small = t * (abs(w) + self.scale_hint() + 1.0) < 0.01
        out = np.empty(t.shape, dtype=complex)
        if np.any(~small):
            tt = t[~small]
            lz = self.eta * tt
            numv = (self.ncoef[None, :] * np.exp(np.outer(lz, self.nexp))).sum(axis=1)
            denv = (self.dcoef[None, :] * np.exp(np.outer(lz, self.dexp))).sum(axis=1)
            expo = np.exp(((self.nshift - self.dshift) * self.eta - 1j * w) * tt)
            out[~small] = (numv / denv * expo - self.a * np.exp(-tt)) / tt
        if np.any(small):
            tt = t[small]
            out[small] = self._series_eval(tt, w)
        return out

    def _series_eval(self, t: np.ndarray, w: complex) -> np.ndarray:
        # h(t) = [R(zeta(t)) e^{-iwt} - a e^{-t}]/t as an exact-coefficient series
        n = self.SERIES_ORDER
        g = [complex(c) * self.eta ** r for r, c in enumerate(self.series)]
        coeffs = np.zeros(n + 1, dtype=complex)
        fact = 1.0
        for m in range(n + 1):
            if m:
                fact *= m
            em = (-1j * w) ** m / fact
            am = (-1.0) ** m / fact
            for r in range(n + 1 - m):
                coeffs[r + m] += g[r] * em
            coeffs[m] -= self.a * am
        # constant term cancels exactly; divide by t
        out = np.zeros(t.shape, dtype=complex)
        for r in range(n, 0, -1):
            out = out * t + coeffs[r]
        return out


def _series_divide(nser: list[GR], dser: list[GR], order: int) -> list[GR]:
    """Series quotient q with nser = dser * q, allowing a common leading zero."""
    lead = 0
    while lead < len(dser) and dser[lead].is_zero():
        if not nser[lead].is_zero():
            raise IllPosedContraction("integrand pole at t=0 beyond 1/t")
        lead += 1
    d = dser[lead:]
    nn = nser[lead:]
    q: list[GR] = []
    for r in range(order + 1):
        acc = nn[r] if r < len(nn) else GR_ZERO
        for j in range(1, min(r, len(d) - 1) + 1):
            acc = acc - d[j] * q[r - j]
        q.append(acc / d[0])
    return q


# ---------------------------------------------------------------------------
# contraction construction

def contract(f: ModeFunction, g: ModeFunction, K: Kernel,
             params: AlgebraParams) -> ContractionIntegrand:
    """Integrand of <A(u) B(v)>: f's t>0 branch against g's t<0 branch
    reflected, times the commutator density (its 1/(hbar^2 t) divisor is
    carried implicitly: hbar powers must cancel and the 1/t is part of the
    integrand shape)."""
    terms = []
    for tf in f.positive_branch:
        for tg in g.negative_branch:
            tr = tg.reflected()
            coeff = tf.coeff * tr.coeff * GR.of(K.sign)
            hpow = tf.hbar_power + tr.hbar_power - 2
            if hpow != 0:
                raise IllPosedContraction(
                    f"unbalanced hbar power {hpow} in contraction")
            sinh = tuple(list(tf.sinh_factors) + list(tr.sinh_factors)
                         + list(K.sinh_factors()))
            terms.append(ExpTrigTerm(coeff, 0, tf.tilt() + tr.tilt(), Fraction(0), sinh))
    dens = [1]
    for t in terms:
        dens.extend(t.denominators())
    lattice = _lcm(*dens)
    total = LaurentRational.zero()
    for t in terms:
        total = total + t.laurent(lattice)
    return ContractionIntegrand(terms, lattice, total)


# ---------------------------------------------------------------------------
# quadrature

_DE_MAX_LEVEL = 8  # 2^14 node cap is reached at level 8 with the base grid


def quad_eval(I: ContractionIntegrand, w: complex, params: AlgebraParams,
              tol: float = 1e-10) -> complex:
    """Frullani-regularized contraction integral by exp-sinh quadrature.

    Requires w inside the absolute-convergence strip Im w < -sigma*hbar.
    """
    if I.is_zero():
        return 0.0
    hbar = params.hbar_float
    bound = I.strip_bound(hbar)
    decay = -(w.imag + bound)
    if decay <= 0:
        raise OutsideConvergenceStrip(w, -bound)
    ev = I.evaluator(hbar)

    # node range: t = exp(pi/2 sinh(s)); cover until e^{-decay t} is negligible
    t_max = 60.0 / min(decay, 1.0) if decay < 1.0 else 60.0 / decay + 10.0
    s_hi = math.asinh(max(2.0 * math.log(t_max) / math.pi, 1.0)) + 0.5
    s_lo = -math.asinh(2.0 * 42.0 / math.pi)  # t ~ e^{-42}, weight kills the rest

    def level_nodes(h: float, offset: bool) -> tuple[np.ndarray, np.ndarray]:
        if offset:
            s = np.arange(s_lo + h / 2.0, s_hi, h)
        else:
            s = np.arange(s_lo, s_hi + h / 2.0, h)
        u = 0.5 * math.pi * np.sinh(s)
        t = np.exp(u)
        wgt = 0.5 * math.pi * np.cosh(s) * t
        return t, wgt

    h = 0.5
    t, wgt = level_nodes(h, offset=False)
    total = np.sum(ev(t, w) * wgt) * h
    prev = None
    for _ in range(_DE_MAX_LEVEL):
        t, wgt = level_nodes(h, offset=True)
        mid = np.sum(ev(t, w) * wgt) * h
        new = 0.5 * (total + mid)
        h *= 0.5
        err = abs(new - total)
        prev, total = total, new
        if err <= max(tol * 0.1, 1e-14 * (1.0 + abs(new))):
            return complex(total)
    if abs(total - prev) > tol * (1.0 + abs(total)):
        raise QuadratureNonConvergent(
            f"error estimate {abs(total - prev):.2e} above {tol:.1e} at node cap")
    return complex(total)


# ---------------------------------------------------------------------------
# closed form

def closed_form(I: ContractionIntegrand, params: AlgebraParams) -> StructureFunction:
    """Exact structure function with exp(closed_form) = exp(quad_eval).

    Pure exponential families reduce by Frullani to linear factors; a single
    cyclotomic denominator reduces to Gamma factors with the exact
    regularization constant D^{sum d_j x_j}.  Denominators with repeated
    roots do not telescope and raise NonTelescoping.
    """
    if I.is_zero():
        return StructureFunction.one()
    num, den = I.rational.num, I.rational.den
    L = I.lattice
    if len(den.c) == 1:
        # monomial denominator: purely exponential families
        h = den.min_exp()
        c = den.c[h]
        sf = StructureFunction.one()
        for m, v in num.c.items():
            cm = v / c
            e = _as_int(cm, "Frullani family coefficient")
            rho = Fraction(-(m - h), 2 * L)
            sf = sf * StructureFunction.from_linear(GR.of(rho), -e)
        return sf

    # denominator must divide zeta^{2M} - 1 for the family order M
    M = _family_order(den, L)
    if M is None:
        raise NonTelescoping(
            "denominator has repeated roots; families do not reduce to Gamma factors")
    tm = [GR.of(-1)] + [GR_ZERO] * (2 * M - 1) + [GR_ONE]  # zeta^{2M} - 1
    dd = den.to_dense(0)
    q, r = _poly_divmod(tm, dd)
    if any(v for v in r):
        raise NonTelescoping("denominator does not divide the cyclotomic target")
    qpoly = LaurentPoly({i: v for i, v in enumerate(q) if v})
    # R = N q zeta^{-2M} / (1 - zeta^{-2M})
    pnum = num * qpoly
    scale = Fraction(M, L)
    sf = StructureFunction.one()
    dsum = GR_ZERO
    s1 = Fraction(0)
    for m, v in pnum.c.items():
        d = _as_int(v, "Gamma family coefficient")
        # term d zeta^{m-2M} = d e^{(m-2M) eta t}: x = iw/D - (m-2M)/(2M)
        shift = Fraction(-(m - 2 * M), 2 * M)
        sf = sf * StructureFunction.from_gamma(GR.of(scale), shift, d)
        dsum = dsum + v
        s1 += d * shift
    if dsum:
        raise IllPosedContraction("family coefficients do not sum to zero")
    # regularization constant D^{S1} with D = scale * hbar
    out = StructureFunction(sf.gammas, sf.linears,
                            sf.const.times_base(GR.of(scale), 1, s1),
                            sf.exp_linear)
    # internal consistency: -S1 must equal the 1/t coefficient
    if -s1 != I.log_divergence_coeff:
        raise IllPosedContraction(
            f"divergence bookkeeping mismatch: {-s1} vs {I.log_divergence_coeff}")
    return out


def _as_int(v: GR, what: str) -> int:
    if not v.is_real() or v.re.denominator != 1:
        raise NonTelescoping(f"{what} {v!r} is not an integer")
    return int(v.re)


def _family_order(den: LaurentPoly, L: int) -> int | None:
    """Smallest M with den | (zeta^{2M} - 1), or None."""
    deg = den.max_exp() - den.min_exp()
    # all roots are roots of unity of bounded order for lattice slopes
    for M in range(max(1, (deg + 1) // 2), 8 * L * max(1, deg) + 1):
        tm = [GR.of(-1)] + [GR_ZERO] * (2 * M - 1) + [GR_ONE]
        _, r = _poly_divmod(tm, den.to_dense(0))
        if not any(v for v in r):
            return M
    return None


# ---------------------------------------------------------------------------
# exchange factors

def exchange_factor(f: ModeFunction, g: ModeFunction, K: Kernel,
                    params: AlgebraParams) -> StructureFunction:
    """S(w) with A(u)B(v) = S(u-v) B(v)A(u), from the two contraction
    orderings.  The log-divergence coefficients must cancel exactly."""
    fwd = contract(f, g, K, params)
    rev = contract(g, f, K, params)
    if fwd.log_divergence_coeff != rev.log_divergence_coeff:
        raise DivergenceMismatch(
            f"1/t coefficients differ: {fwd.log_divergence_coeff} vs "
            f"{rev.log_divergence_coeff}")
    s_f = closed_form(fwd, params)
    s_r = closed_form(rev, params)
    # returned unreduced: the raw Gamma multiset is meaningful on its own
    # (golden-factor comparisons); callers normalize when cancelling.
    return s_f * s_r.negate_w().inverse()

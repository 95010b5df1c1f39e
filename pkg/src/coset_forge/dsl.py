"""Definition-file parser for the `.alg` format.

A definition file declares the session parameters, the Heisenberg kernels,
the currents (primitive ones by their exponent expressions, composite ones
by products and sums of earlier currents with argument shifts), and the
relations to verify.  The expression grammar is deliberately small:
rationals and rational functions of k, hbar powers, exponential tilts
E(a*h*t), sinh(b*h*t)^n factors, and the spectral phase E(-i*u*t), which
every exponent carries implicitly and may be written for emphasis.

Parsing is deterministic recursive descent; every syntax error reports
line, column and the expected token set.  Printing a parsed file with
render() and reparsing gives an equal DefinitionFile.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .algebra import Catalog, Current, NormalOrderedTerm, Relation
from .contraction import StructureFunction
from .errors import DuplicateName, ParseError, UndeclaredName
from .exact import GR, GR_I, KRat
from .modes import AlgebraParams, ExpTrigTerm, Kernel, ModeFunction, shift_argument

__all__ = ["parse_definitions", "DefinitionFile"]

_KEYWORDS = {
    "params", "kernel", "current", "relation", "commutator_delta", "on",
    "pos", "neg", "sign", "slope", "k", "hbar", "h", "t", "u", "v", "i",
    "exp", "sinh", "Gamma", "iw", "w", "x", "with", "rotate", "tol", "shape",
    "poles", "residues", "rotate_sector",
}
_PUNCT = ("==", "^", "@", "{", "}", "(", ")", "=", ";", ":", ",", "*", "/",
          "+", "-")


@dataclass(frozen=True)
class Token:
    kind: str          # "ident", "keyword", "number", "float", "punct", "eof"
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[Token]:
    toks = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if text.startswith("==", i):
            toks.append(Token("punct", "==", line, col))
            i += 2
            col += 2
            continue
        if c.isdigit():
            j = i
            isfloat = False
            while j < n and text[j].isdigit():
                j += 1
            if j < n and text[j] == ".":
                isfloat = True
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            if j < n and text[j] in "eE" and (
                    j + 1 < n and (text[j + 1].isdigit()
                                   or (text[j + 1] in "+-" and j + 2 < n
                                       and text[j + 2].isdigit()))):
                isfloat = True
                j += 1
                if text[j] in "+-":
                    j += 1
                while j < n and text[j].isdigit():
                    j += 1
            word = text[i:j]
            toks.append(Token("float" if isfloat else "number", word, line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = "keyword" if word in _KEYWORDS else "ident"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        if c in "^@{}()=;:,*/+-":
            toks.append(Token("punct", c, line, col))
            i += 1
            col += 1
            continue
        raise ParseError(line, col, {"token"}, c)
    toks.append(Token("eof", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# declaration records

@dataclass
class TermDecl:
    coeff: KRat
    hbar_power: int
    shift: KRat
    sinh: list[tuple[KRat, int]]

    def __eq__(self, other):
        return (isinstance(other, TermDecl)
                and _krat_eq(self.coeff, other.coeff)
                and self.hbar_power == other.hbar_power
                and _krat_eq(self.shift, other.shift)
                and len(self.sinh) == len(other.sinh)
                and all(_krat_eq(a, c) and b == d for (a, b), (c, d)
                        in zip(self.sinh, other.sinh)))


@dataclass
class CompositeRef:
    name: str
    inverse: bool = False
    shift: KRat | None = None

    def __eq__(self, other):
        return (isinstance(other, CompositeRef) and self.name == other.name
                and self.inverse == other.inverse
                and _opt_krat_eq(self.shift, other.shift))


@dataclass
class CompositeTerm:
    coeff: KRat
    hbar_power: int
    refs: list[CompositeRef]

    def __eq__(self, other):
        return (isinstance(other, CompositeTerm)
                and _krat_eq(self.coeff, other.coeff)
                and self.hbar_power == other.hbar_power
                and self.refs == other.refs)


@dataclass
class CurrentDecl:
    name: str
    kernel: str | None = None                      # primitive currents
    pos: list[TermDecl] = field(default_factory=list)
    neg: list[TermDecl] = field(default_factory=list)
    composite: list[CompositeTerm] | None = None   # composite currents


@dataclass
class KernelDecl:
    name: str
    sign: int
    slope: KRat

    def __eq__(self, other):
        return (isinstance(other, KernelDecl) and self.name == other.name
                and self.sign == other.sign and _krat_eq(self.slope, other.slope))


@dataclass
class FactorDecl:
    kind: str                      # "w", "iw", "gamma", "scalar"
    offset: KRat | None = None     # w/iw: (w + offset*hbar)
    scale: KRat | None = None      # gamma: x@scale, sign folded in
    scale_sign: int = 1
    shift: KRat | None = None
    exponent: int = 1
    scalar: KRat | None = None

    def __eq__(self, other):
        return (isinstance(other, FactorDecl) and self.kind == other.kind
                and _opt_krat_eq(self.offset, other.offset)
                and _opt_krat_eq(self.scale, other.scale)
                and self.scale_sign == other.scale_sign
                and _opt_krat_eq(self.shift, other.shift)
                and self.exponent == other.exponent
                and _opt_krat_eq(self.scalar, other.scalar))


@dataclass
class RelationDecl:
    name: str
    kind: str                              # "exchange" | "shape"
    left_factors: list[FactorDecl]
    left_pair: tuple[str, str]
    right_factors: list[FactorDecl]
    right_pair: tuple[str, str]
    rotate: str = "none"
    tol: float | None = None


@dataclass
class CommutatorDecl:
    name_a: str
    name_b: str
    poles: list[KRat]
    residues: list[tuple[str, KRat]]

    def __eq__(self, other):
        return (isinstance(other, CommutatorDecl)
                and self.name_a == other.name_a and self.name_b == other.name_b
                and len(self.poles) == len(other.poles)
                and all(_krat_eq(a, b) for a, b in zip(self.poles, other.poles))
                and len(self.residues) == len(other.residues)
                and all(n == m and _krat_eq(a, b) for (n, a), (m, b)
                        in zip(self.residues, other.residues)))


def _krat_eq(a: KRat, b: KRat) -> bool:
    return KRat._mul_poly(a.num, b.den) == KRat._mul_poly(b.num, a.den)


def _opt_krat_eq(a, b):
    if a is None or b is None:
        return a is None and b is None
    return _krat_eq(a, b)


@dataclass
class DefinitionFile:
    k: KRat
    hbars: list[KRat]
    rotation_sector: str | None
    kernels: list[KernelDecl]
    currents: list[CurrentDecl]
    relations: list[RelationDecl]
    commutators: list[CommutatorDecl]

    def __eq__(self, other):
        if not isinstance(other, DefinitionFile):
            return NotImplemented
        return (
            _krat_eq(self.k, other.k)
            and len(self.hbars) == len(other.hbars)
            and all(_krat_eq(a, b) for a, b in zip(self.hbars, other.hbars))
            and self.rotation_sector == other.rotation_sector
            and self.kernels == other.kernels
            and _currents_eq(self.currents, other.currents)
            and _relations_eq(self.relations, other.relations)
            and self.commutators == other.commutators)

    # -- canonical rendering ------------------------------------------------
    def render(self) -> str:
        out = []
        out.append("params {")
        out.append(f"  k = {_krat_str(self.k)};")
        out.append("  hbar = " + ", ".join(_krat_str(h) for h in self.hbars) + ";")
        out.append("}")
        if self.rotation_sector:
            out.append(f"rotate_sector {self.rotation_sector};")
        for kd in self.kernels:
            sg = "+1" if kd.sign > 0 else "-1"
            out.append(f"kernel {kd.name} {{ sign = {sg}; slope = {_krat_str(kd.slope)}; }}")
        for cd in self.currents:
            if cd.composite is None:
                out.append(f"current {cd.name} on {cd.kernel} {{")
                for label, terms in (("pos", cd.pos), ("neg", cd.neg)):
                    if terms:
                        out.append(f"  {label}: " + " + ".join(
                            _term_str(t) for t in terms) + ";")
                out.append("}")
            else:
                out.append(f"current {cd.name} = "
                           + " + ".join(_cterm_str(t) for t in cd.composite) + ";")
        for rd in self.relations:
            out.append(_relation_str(rd))
        for cm in self.commutators:
            out.append(f"commutator_delta {cm.name_a} {cm.name_b} {{")
            out.append("  poles: " + ", ".join(_krat_str(p) for p in cm.poles) + ";")
            out.append("  residues: " + ", ".join(
                f"{n} @ ({_krat_str(s)})" for n, s in cm.residues) + ";")
            out.append("}")
        return "\n".join(out) + "\n"

    # -- binding --------------------------------------------------------------
    def bind(self, k_override: Fraction | None = None,
             hbar_override: list[Fraction] | None = None):
        """Evaluate all declarations at a concrete level, producing the
        algebra parameters, the catalog, the relation list and the
        commutator-delta specifications."""
        # the declared k must be a constant; bind at 0 evaluates it
        kval = k_override if k_override is not None else self.k.bind(Fraction(0))
        hbars = (hbar_override if hbar_override is not None
                 else [h.bind(kval) for h in self.hbars])
        if not hbars:
            hbars = [Fraction(1)]
        params = AlgebraParams(kval, hbars[0])
        cat = Catalog(params)
        if self.rotation_sector:
            cat.rotation_sector = self.rotation_sector
        for kd in self.kernels:
            cat.kernels[kd.name] = Kernel(kd.name, kd.sign, kd.slope.bind(kval))
        for cd in self.currents:
            if cd.composite is None:
                mf = ModeFunction(
                    [_bind_term(t, kval) for t in cd.pos],
                    [_bind_term(t, kval) for t in cd.neg])
                cur = Current(cd.name,
                              (NormalOrderedTerm(GR(Fraction(1)), 0,
                                                 {cd.kernel: mf}),))
            else:
                cur = _bind_composite(cd, cat, kval)
            cat.currents[cd.name] = cur
        relations = [_bind_relation(rd, kval) for rd in self.relations]
        commutators = [
            {"pair": (cm.name_a, cm.name_b),
             "poles": [p.bind(kval) for p in cm.poles],
             "residues": [(n, s.bind(kval)) for n, s in cm.residues]}
            for cm in self.commutators]
        return params, cat, relations, commutators, hbars


def _currents_eq(a: list[CurrentDecl], b: list[CurrentDecl]) -> bool:
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if (x.name, x.kernel) != (y.name, y.kernel):
            return False
        if (x.composite is None) != (y.composite is None):
            return False
        if x.composite is None:
            if x.pos != y.pos or x.neg != y.neg:
                return False
        elif x.composite != y.composite:
            return False
    return True


def _relations_eq(a: list[RelationDecl], b: list[RelationDecl]) -> bool:
    if len(a) != len(b):
        return False
    for x, y in zip(a, b):
        if (x.name, x.kind, x.left_pair, x.right_pair, x.rotate, x.tol) != \
           (y.name, y.kind, y.left_pair, y.right_pair, y.rotate, y.tol):
            return False
        if x.left_factors != y.left_factors or x.right_factors != y.right_factors:
            return False
    return True


# rendering helpers ----------------------------------------------------------

def _krat_str(x: KRat) -> str:
    def poly(p):
        bits = []
        for e in sorted(p, reverse=True):
            v = p[e]
            if e == 0:
                bits.append(str(v))
            elif e == 1:
                bits.append("k" if v == 1 else f"{v}*k")
            else:
                bits.append(f"{v}*k^{e}")
        return " + ".join(bits) if bits else "0"
    if x.den == {0: Fraction(1)}:
        body = poly(x.num)
        return body if len(x.num) <= 1 else f"({body})"
    return f"({poly(x.num)})/({poly(x.den)})"


def _term_str(t: TermDecl) -> str:
    bits = [_krat_str(t.coeff)]
    if t.hbar_power == 1:
        bits.append("hbar")
    elif t.hbar_power != 0:
        bits.append(f"hbar^{t.hbar_power}")
    if not _krat_eq(t.shift, KRat.const(0)):
        bits.append(f"exp({_krat_str(t.shift)}*h*t)")
    bits.append("exp(-i*u*t)")
    num = " * ".join(bits)
    for beta, e in t.sinh:
        if e > 0:
            num += f" * sinh({_krat_str(beta)}*h*t)" + (f"^{e}" if e != 1 else "")
        else:
            num += f" / sinh({_krat_str(beta)}*h*t)" + (f"^{-e}" if e != -1 else "")
    return num


def _cterm_str(t: CompositeTerm) -> str:
    bits = [f"({_krat_str(t.coeff)}"
            + ("/hbar" if t.hbar_power == -1 else
               (f"*hbar^{t.hbar_power}" if t.hbar_power else "")) + ")"]
    for r in t.refs:
        s = r.name
        if r.inverse:
            s += "^-1"
        if r.shift is not None:
            s += f"@({_krat_str(r.shift)})"
        bits.append(s)
    return " * ".join(bits)


def _factor_str(f: FactorDecl) -> str:
    if f.kind == "scalar":
        return _krat_str(f.scalar)
    if f.kind in ("w", "iw"):
        off = ""
        if f.offset is not None and not _krat_eq(f.offset, KRat.const(0)):
            off = f" + {_krat_str(f.offset)}*hbar"
        body = f"({f.kind}{off})"
    else:
        sg = "" if f.scale_sign > 0 else "-"
        body = f"Gamma({sg}x@{_krat_str(f.scale)} + {_krat_str(f.shift)})"
    if f.exponent != 1:
        body += f"^{f.exponent}"
    return body


def _relation_str(rd: RelationDecl) -> str:
    def side(factors, pair, pvars):
        bits = [_factor_str(f) for f in factors]
        bits.append(f"{pair[0]}({pvars[0]}) {pair[1]}({pvars[1]})")
        return (" * ".join(bits[:-1]) + " * " if len(bits) > 1 else "") + bits[-1]
    lhs = side(rd.left_factors, rd.left_pair, ("u", "v"))
    rhs = side(rd.right_factors, rd.right_pair, ("v", "u"))
    body = f"relation {rd.name} : "
    if rd.kind == "shape":
        body += f"shape {rd.left_pair[0]}(u) {rd.left_pair[1]}(v)"
    else:
        body += f"{lhs} == {rhs}"
    opts = []
    if rd.rotate != "none":
        opts.append(f"rotate = {rd.rotate}")
    if rd.tol is not None:
        opts.append(f"tol = {rd.tol:g}")
    if opts:
        body += " with " + ", ".join(opts)
    return body + ";"


# binding helpers -------------------------------------------------------------

def _bind_term(t: TermDecl, k: Fraction) -> ExpTrigTerm:
    return ExpTrigTerm(GR(t.coeff.bind(k)), t.hbar_power, t.shift.bind(k),
                       Fraction(0),
                       tuple((b.bind(k), e) for b, e in t.sinh))


def _bind_composite(cd: CurrentDecl, cat: Catalog, k: Fraction) -> Current:
    out_terms: list[NormalOrderedTerm] = []
    for term in cd.composite:
        # expand the reference product bilinearly over referenced terms
        partial = [(GR(term.coeff.bind(k)), term.hbar_power, {})]
        for ref in term.refs:
            if ref.name not in cat.currents:
                raise UndeclaredName(f"current {ref.name!r} not declared before use")
            sub = cat.currents[ref.name]
            new_partial = []
            for coeff, hpow, exps in partial:
                for st in sub.terms:
                    merged = dict(exps)
                    for fam, mf in st.exponents.items():
                        g = mf
                        if ref.inverse:
                            g = -g
                        if ref.shift is not None:
                            g = shift_argument(g, ref.shift.bind(k))
                        merged[fam] = g if fam not in merged else merged[fam] + g
                    if ref.inverse and len(sub.terms) > 1:
                        raise UndeclaredName(
                            f"cannot invert composite current {ref.name!r}")
                    new_partial.append((coeff * st.coeff,
                                        hpow + st.hbar_power, merged))
            partial = new_partial
        for coeff, hpow, exps in partial:
            out_terms.append(NormalOrderedTerm(coeff, hpow, exps))
    return Current(cd.name, tuple(out_terms))


def _bind_factor(f: FactorDecl, k: Fraction) -> StructureFunction:
    if f.kind == "scalar":
        return StructureFunction.from_const_gr(GR(f.scalar.bind(k)))
    if f.kind == "iw":
        off = f.offset.bind(k) if f.offset is not None else Fraction(0)
        return StructureFunction.from_linear(GR(off), f.exponent)
    if f.kind == "w":
        off = f.offset.bind(k) if f.offset is not None else Fraction(0)
        one = (StructureFunction.from_linear(GR_I * GR(off), 1)
               * StructureFunction.from_const_gr(GR(Fraction(0), Fraction(-1))))
        out = StructureFunction.one()
        inv = one.inverse()
        for _ in range(abs(f.exponent)):
            out = out * (one if f.exponent > 0 else inv)
        return out
    scale = f.scale.bind(k) * f.scale_sign
    return StructureFunction.from_gamma(GR(scale), f.shift.bind(k), f.exponent)


def _bind_relation(rd: RelationDecl, k: Fraction) -> Relation:
    lf = StructureFunction.one()
    for f in rd.left_factors:
        lf = lf * _bind_factor(f, k)
    rf = StructureFunction.one()
    for f in rd.right_factors:
        rf = rf * _bind_factor(f, k)
    rel = Relation(rd.name, rd.kind, rd.left_pair, rd.right_pair,
                   left_factor=lf, right_factor=rf, rotate=rd.rotate)
    if rd.tol is not None:
        rel.tolerance = rd.tol
    return rel


# ---------------------------------------------------------------------------
# the parser

class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    @property
    def cur(self) -> Token:
        return self.toks[self.i]

    def error(self, expected: set[str]):
        t = self.cur
        raise ParseError(t.line, t.col, expected, t.text or "end of input")

    def accept(self, text: str) -> bool:
        if self.cur.text == text and self.cur.kind in ("punct", "keyword"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> Token:
        if self.cur.text == text and self.cur.kind in ("punct", "keyword"):
            t = self.cur
            self.i += 1
            return t
        self.error({repr(text)})

    def expect_ident(self) -> str:
        if self.cur.kind == "ident":
            t = self.cur
            self.i += 1
            return t.text
        self.error({"identifier"})

    def expect_number(self) -> Fraction:
        if self.cur.kind == "number":
            t = self.cur
            self.i += 1
            return Fraction(int(t.text))
        self.error({"number"})

    # -- k-rational expressions -------------------------------------------
    def kexpr(self) -> KRat:
        val = self.kterm()
        while self.cur.text in ("+", "-") and self.cur.kind == "punct":
            op = self.cur.text
            self.i += 1
            rhs = self.kterm()
            val = val + rhs if op == "+" else val - rhs
        return val

    def kterm(self) -> KRat:
        val = self.kfactor()
        while self.cur.text in ("*", "/") and self.cur.kind == "punct":
            op = self.cur.text
            self.i += 1
            rhs = self.kfactor()
            val = val * rhs if op == "*" else val / rhs
        return val

    def kfactor(self) -> KRat:
        if self.accept("-"):
            return -self.kfactor()
        if self.accept("+"):
            return self.kfactor()
        if self.cur.kind == "number":
            return KRat.const(self.expect_number())
        if self.accept("k"):
            return KRat.k()
        if self.accept("("):
            v = self.kexpr()
            self.expect(")")
            return v
        self.error({"number", "'k'", "'('", "'-'"})

    # -- top level -----------------------------------------------------------
    def file(self) -> DefinitionFile:
        k = KRat.const(2)
        hbars: list[KRat] = []
        sector = None
        kernels, currents, relations, commutators = [], [], [], []
        names = set()
        while self.cur.kind != "eof":
            if self.accept("params"):
                k, hbars = self.params_block(k, hbars)
            elif self.accept("rotate_sector"):
                sector = self.expect_ident()
                self.expect(";")
            elif self.accept("kernel"):
                kd = self.kernel_block()
                if kd.name in names:
                    raise DuplicateName(f"kernel {kd.name!r} declared twice")
                names.add(kd.name)
                kernels.append(kd)
            elif self.accept("current"):
                cd = self.current_block({k.name for k in kernels},
                                        {c.name for c in currents})
                if cd.name in names:
                    raise DuplicateName(f"current {cd.name!r} declared twice")
                names.add(cd.name)
                currents.append(cd)
            elif self.accept("relation"):
                rd = self.relation_block({c.name for c in currents})
                if any(r.name == rd.name for r in relations):
                    raise DuplicateName(f"relation {rd.name!r} declared twice")
                relations.append(rd)
            elif self.accept("commutator_delta"):
                commutators.append(self.commutator_block(
                    {c.name for c in currents}))
            else:
                self.error({"'params'", "'kernel'", "'current'", "'relation'",
                            "'commutator_delta'", "'rotate_sector'"})
        return DefinitionFile(k, hbars, sector, kernels, currents,
                              relations, commutators)

    def params_block(self, k, hbars):
        self.expect("{")
        while not self.accept("}"):
            if self.accept("k"):
                self.expect("=")
                k = self.kexpr()
                self.expect(";")
            elif self.accept("hbar"):
                self.expect("=")
                hbars = [self.kexpr()]
                while self.accept(","):
                    hbars.append(self.kexpr())
                self.expect(";")
            else:
                self.error({"'k'", "'hbar'", "'}'"})
        return k, hbars

    def kernel_block(self) -> KernelDecl:
        name = self.expect_ident()
        self.expect("{")
        self.expect("sign")
        self.expect("=")
        sign = 1
        if self.accept("-"):
            sign = -1
        else:
            self.accept("+")
        if self.expect_number() != 1:
            self.error({"'1'"})
        self.expect(";")
        self.expect("slope")
        self.expect("=")
        slope = self.kexpr()
        self.expect(";")
        self.expect("}")
        return KernelDecl(name, sign, slope)

    def current_block(self, kernel_names, current_names) -> CurrentDecl:
        name = self.expect_ident()
        if self.accept("on"):
            kname = self.expect_ident()
            if kname not in kernel_names:
                raise UndeclaredName(f"kernel {kname!r} not declared before use")
            self.expect("{")
            pos, neg = [], []
            while not self.accept("}"):
                if self.accept("pos"):
                    self.expect(":")
                    pos = self.exponent_expr()
                    self.expect(";")
                elif self.accept("neg"):
                    self.expect(":")
                    neg = self.exponent_expr()
                    self.expect(";")
                else:
                    self.error({"'pos'", "'neg'", "'}'"})
            return CurrentDecl(name, kernel=kname, pos=pos, neg=neg)
        self.expect("=")
        comp = self.composite_expr(current_names)
        self.expect(";")
        return CurrentDecl(name, composite=comp)

    # -- exponent expressions -------------------------------------------------
    def exponent_expr(self) -> list[TermDecl]:
        terms = []
        sign = -1 if self.accept("-") else 1
        if sign > 0:
            self.accept("+")
        terms.append(self.exponent_term(sign))
        while self.cur.text in ("+", "-") and self.cur.kind == "punct":
            sgn = 1 if self.cur.text == "+" else -1
            self.i += 1
            terms.append(self.exponent_term(sgn))
        return terms

    def exponent_term(self, sign: int) -> TermDecl:
        coeff = KRat.const(sign)
        hpow = 0
        shift = KRat.const(0)
        sinh: list[tuple[KRat, int]] = []
        invert = False

        def add_factor():
            nonlocal coeff, hpow, shift
            mul = -1 if invert else 1
            if self.accept("hbar"):
                hpow += mul
                return
            if self.cur.kind == "number" or self.cur.text == "(":
                val = self.kfactor()
                if invert:
                    coeff = coeff / val
                else:
                    coeff = coeff * val
                return
            if self.accept("exp"):
                self.expect("(")
                if self.accept("-"):
                    if self.accept("i"):
                        # spectral phase E(-i*u*t), implicit anyway
                        self.expect("*")
                        self.expect("u")
                        self.expect("*")
                        self.expect("t")
                        self.expect(")")
                        return
                    inner = -self.kexpr_stop("h")
                else:
                    inner = self.kexpr_stop("h")
                self.expect("*")
                self.expect("h")
                self.expect("*")
                self.expect("t")
                self.expect(")")
                shift = shift + inner if mul > 0 else shift - inner
                return
            if self.accept("sinh"):
                self.expect("(")
                beta = self.kexpr_stop("h")
                self.expect("*")
                self.expect("h")
                self.expect("*")
                self.expect("t")
                self.expect(")")
                e = 1
                if self.accept("^"):
                    neg = self.accept("-")
                    e = int(self.expect_number())
                    if neg:
                        e = -e
                sinh.append((beta, mul * e))
                return
            self.error({"number", "'hbar'", "'exp'", "'sinh'", "'('"})

        add_factor()
        while self.cur.text in ("*", "/") and self.cur.kind == "punct":
            invert = self.cur.text == "/"
            self.i += 1
            add_factor()
        return TermDecl(coeff, hpow, shift, sinh)

    def kexpr_stop(self, stop: str) -> KRat:
        """kexpr for contexts terminated by `* <stop>` (stop = 'h' or 'hbar');
        multiplicative chains halt when the next factor would be the stop word."""
        val = self.kterm_stop(stop)
        while self.cur.text in ("+", "-") and self.cur.kind == "punct":
            op = self.cur.text
            self.i += 1
            rhs = self.kterm_stop(stop)
            val = val + rhs if op == "+" else val - rhs
        return val

    def kterm_stop(self, stop: str) -> KRat:
        val = self.kfactor()
        while self.cur.text in ("*", "/") and self.cur.kind == "punct":
            if self.toks[self.i + 1].text == stop:
                break
            op = self.cur.text
            self.i += 1
            rhs = self.kfactor()
            val = val * rhs if op == "*" else val / rhs
        return val

    # -- composite expressions -------------------------------------------------
    def composite_expr(self, current_names) -> list[CompositeTerm]:
        terms: list[CompositeTerm] = []
        sign = -1 if self.accept("-") else 1
        terms.extend(self.composite_term(sign, current_names))
        while self.cur.text in ("+", "-") and self.cur.kind == "punct":
            sgn = 1 if self.cur.text == "+" else -1
            self.i += 1
            terms.extend(self.composite_term(sgn, current_names))
        return terms

    def composite_term(self, sign: int, current_names) -> list[CompositeTerm]:
        # a product of scalars, current references, and grouped sums;
        # grouped sums distribute
        factors: list[list[CompositeTerm]] = []

        def atom() -> list[CompositeTerm]:
            if self.cur.kind == "number":
                return [CompositeTerm(KRat.const(self.expect_number()), 0, [])]
            if self.accept("k"):
                return [CompositeTerm(KRat.k(), 0, [])]
            if self.accept("hbar"):
                return [CompositeTerm(KRat.const(1), 1, [])]
            if self.cur.kind == "ident":
                nm = self.expect_ident()
                if nm not in current_names:
                    raise UndeclaredName(f"current {nm!r} not declared before use")
                inverse = False
                shift = None
                if self.accept("^"):
                    self.expect("-")
                    if self.expect_number() != 1:
                        self.error({"'1'"})
                    inverse = True
                if self.accept("@"):
                    self.expect("(")
                    shift = self.kexpr()
                    self.expect(")")
                return [CompositeTerm(KRat.const(1), 0,
                                      [CompositeRef(nm, inverse, shift)])]
            if self.accept("("):
                inner = self.composite_expr(current_names)
                self.expect(")")
                return inner
            self.error({"number", "'k'", "'hbar'", "identifier", "'('"})

        factors.append(atom())
        while self.cur.text in ("*", "/") and self.cur.kind == "punct":
            div = self.cur.text == "/"
            self.i += 1
            nxt = atom()
            if div:
                if len(nxt) != 1 or nxt[0].refs:
                    self.error({"scalar divisor"})
                d = nxt[0]
                nxt = [CompositeTerm(KRat.const(1) / d.coeff, -d.hbar_power, [])]
            factors.append(nxt)

        out = [CompositeTerm(KRat.const(sign), 0, [])]
        for fac in factors:
            nxt = []
            for left in out:
                for right in fac:
                    nxt.append(CompositeTerm(left.coeff * right.coeff,
                                             left.hbar_power + right.hbar_power,
                                             left.refs + right.refs))
            out = nxt
        return out

    # -- relations ---------------------------------------------------------------
    def relation_block(self, current_names) -> RelationDecl:
        name = self.expect_ident()
        self.expect(":")
        if self.accept("shape"):
            pair = self.pair(current_names, ("u", "v"))
            rotate, tol = self.relation_opts()
            self.expect(";")
            return RelationDecl(name, "shape", [], pair, [], pair[::-1],
                                rotate, tol)
        lf, lpair = self.side(current_names, ("u", "v"))
        self.expect("==")
        rf, rpair = self.side(current_names, ("v", "u"))
        if rpair != lpair[::-1]:
            self.error({f"reversed pair {lpair[::-1]}"})
        rotate, tol = self.relation_opts()
        self.expect(";")
        return RelationDecl(name, "exchange", lf, lpair, rf, rpair, rotate, tol)

    def relation_opts(self):
        rotate, tol = "none", None
        if self.accept("with"):
            while True:
                if self.accept("rotate"):
                    self.expect("=")
                    word = self.cur.text
                    if word not in ("none", "global", "c_sector"):
                        self.error({"'none'", "'global'", "'c_sector'"})
                    self.i += 1
                    rotate = "c-sector" if word == "c_sector" else word
                elif self.accept("tol"):
                    self.expect("=")
                    if self.cur.kind in ("float", "number"):
                        tol = float(self.cur.text)
                        self.i += 1
                    else:
                        self.error({"tolerance value"})
                else:
                    self.error({"'rotate'", "'tol'"})
                if not self.accept(","):
                    break
        return rotate, tol

    def side(self, current_names, pvars):
        factors = []
        while True:
            if self.cur.kind == "ident":
                pair = self.pair(current_names, pvars)
                return factors, pair
            factors.append(self.relation_factor())
            self.expect("*")

    def relation_factor(self) -> FactorDecl:
        if self.cur.kind == "number":
            return FactorDecl("scalar", scalar=KRat.const(self.expect_number()))
        if self.accept("Gamma"):
            self.expect("(")
            ssign = -1 if self.accept("-") else 1
            self.expect("x")
            self.expect("@")
            scale = self.kfactor()
            if self.accept("+"):
                shift = self.kexpr()
            elif self.accept("-"):
                shift = -self.kexpr()
            else:
                shift = KRat.const(0)
            self.expect(")")
            e = 1
            if self.accept("^"):
                neg = self.accept("-")
                e = int(self.expect_number())
                if neg:
                    e = -e
            return FactorDecl("gamma", scale=scale, scale_sign=ssign,
                              shift=shift, exponent=e)
        if self.accept("("):
            if self.cur.text in ("w", "iw") and self.cur.kind == "keyword":
                kind = self.cur.text
                self.i += 1
                offset = KRat.const(0)
                if self.accept("+"):
                    offset = self.kexpr_until_hbar()
                elif self.accept("-"):
                    offset = -self.kexpr_until_hbar()
                self.expect(")")
                e = 1
                if self.accept("^"):
                    neg = self.accept("-")
                    e = int(self.expect_number())
                    if neg:
                        e = -e
                return FactorDecl(kind, offset=offset, exponent=e)
            scalar = self.kexpr()
            self.expect(")")
            return FactorDecl("scalar", scalar=scalar)
        self.error({"'('", "'Gamma'", "number", "identifier"})

    def kexpr_until_hbar(self) -> KRat:
        """Parse `<kexpr> * hbar`, returning the kexpr."""
        val = self.kexpr_stop("hbar")
        self.expect("*")
        self.expect("hbar")
        return val

    def pair(self, current_names, pvars) -> tuple[str, str]:
        a = self.expect_ident()
        if a not in current_names:
            raise UndeclaredName(f"current {a!r} not declared before use")
        self.expect("(")
        self.expect(pvars[0])
        self.expect(")")
        b = self.expect_ident()
        if b not in current_names:
            raise UndeclaredName(f"current {b!r} not declared before use")
        self.expect("(")
        self.expect(pvars[1])
        self.expect(")")
        return (a, b)

    def commutator_block(self, current_names) -> CommutatorDecl:
        a = self.expect_ident()
        b = self.expect_ident()
        for nm in (a, b):
            if nm not in current_names:
                raise UndeclaredName(f"current {nm!r} not declared before use")
        self.expect("{")
        self.expect("poles")
        self.expect(":")
        poles = [self.kexpr()]
        while self.accept(","):
            poles.append(self.kexpr())
        self.expect(";")
        self.expect("residues")
        self.expect(":")
        residues = []
        while True:
            nm = self.expect_ident()
            if nm not in current_names:
                raise UndeclaredName(f"current {nm!r} not declared before use")
            self.expect("@")
            self.expect("(")
            residues.append((nm, self.kexpr()))
            self.expect(")")
            if not self.accept(","):
                break
        self.expect(";")
        self.expect("}")
        return CommutatorDecl(a, b, poles, residues)


def parse_definitions(text: str) -> DefinitionFile:
    """Parse `.alg` text into a validated DefinitionFile."""
    return _Parser(text).file()

"""Batch verification driver.

    coset-forge <catalog|contract|verify|poles|limit|report> [file]
        [--k R] [--hbar R[,R...]] [--grid-n N] [--grid-range A,B]
        [--tol X] [--json PATH] [--rotate <c-sector|global|none>]
        [--relation NAME] [--all] [--at RE,IM] [--pair A,B] [--workers N]

Exit codes: 0 all checks pass, 1 verification failure, 2 input error.
JSON reports are deterministic: keys sorted, every float rendered with 17
significant digits (lowercase exponent) as a decimal string, grids built
from fixed rules rather than random draws.
"""

from __future__ import annotations

import argparse
import cmath
import importlib.resources
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

from .algebra import (ClassicalBraid, Relation, VerificationReport,
                      classical_limit, default_grid, ef_commutator_analysis,
                      verify_relation)
from .contraction import closed_form, contract, quad_eval
from .dsl import parse_definitions
from .errors import CosetForgeError, NonConvergent, ParseError

SCHEMA_VERSION = "1"


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _fmt_c(z: complex) -> dict:
    return {"re": _fmt(z.real), "im": _fmt(z.imag)}


def _load(path: str | None):
    if path is None:
        res = importlib.resources.files("coset_forge") / "data" / "paper.alg"
        return res.read_text()
    with open(path, "r", encoding="utf-8") as fh:
        return fh.read()


def _parse_fraction_list(text: str) -> list[Fraction]:
    return [Fraction(part) for part in text.split(",")]


def _bind_session(args):
    text = _load(args.file)
    df = parse_definitions(text)
    k = Fraction(args.k) if args.k else None
    hbars = _parse_fraction_list(args.hbar) if args.hbar else None
    params, cat, rels, comms, hbars = df.bind(k, hbars)
    if args.rotate:
        for rel in rels:
            rel.rotate = args.rotate
    if args.tol:
        for rel in rels:
            rel.tolerance = args.tol
    return df, params, cat, rels, comms, hbars


def _session_grid(args, params, avoid=None):
    lo, hi = 0.1, 10.0
    if args.grid_range:
        lo, hi = (float(x) for x in args.grid_range.split(","))
    return default_grid(params, n=args.grid_n, lo=lo, hi=hi, avoid=avoid)


def _report_to_dict(rep: VerificationReport) -> dict:
    return {
        "id": rep.rel_id,
        "kind": rep.kind,
        "pass": rep.passed,
        "symbolic_pass": rep.symbolic_pass,
        "max_rel_err": _fmt(rep.max_rel_err),
        "grid": [_fmt_c(w) for w in rep.grid],
        "residuals": [_fmt(r) for r in rep.residuals],
        "derived_factor": rep.derived_factor,
        "expected_factor": rep.expected_factor,
        "poles": [
            {"w_exact": _fmt_c(p["w_exact"]), "w_numeric": _fmt_c(p["w_numeric"]),
             "abs_err": _fmt(p["abs_err"]),
             "pairs": [list(x) for x in p["pairs"]]}
            for p in rep.poles],
        "residue_ops": [
            {"pole_w": _fmt_c(r["pole_w"]), "scalar": r["scalar_gr"],
             "scalar_hbar_power": r["scalar_hbar_power"],
             "matches": r["matches"],
             "derived_u1_shift": r["derived_u1_shift"],
             "sector_exponents_vanish": r["sector_exponents_vanish"]}
            for r in rep.residue_ops],
        "limit_fit": ({} if not rep.limit_fit else {
            "order": _fmt(rep.limit_fit["order"]),
            "errors": [_fmt(e) for e in rep.limit_fit["errors"]],
            "target": _fmt_c(rep.limit_fit["target"]),
            "skipped": bool(rep.limit_fit.get("skipped", False))}),
        "notes": list(rep.notes),
    }


def _run_relations(cat, rels, args, workers=4) -> list[VerificationReport]:
    grid = _session_grid(args, cat.params)

    def one(rel: Relation) -> VerificationReport:
        return verify_relation(cat, rel, grid=grid)

    if workers > 1 and len(rels) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, rels))
    else:
        reports = [one(r) for r in rels]
    return sorted(reports, key=lambda r: r.rel_id)


def _run_commutators(cat, comms, args) -> list[VerificationReport]:
    out = []
    for cm in comms:
        out.append(ef_commutator_analysis(
            cat, e_name=cm["pair"][0], f_name=cm["pair"][1],
            expected_poles=cm["poles"], residue_targets=cm["residues"]))
    return out


def _run_limits(cat, hbars_seq, pairs) -> list[VerificationReport]:
    out = []
    for (a, b) in pairs:
        ab = 1 if a == b else -1
        braid = ClassicalBraid(1, ab, cat.params.k)
        try:
            rep = classical_limit(cat, (a, b), braid, hbars_seq,
                                  w=1.0 + 0.002j)
        except NonConvergent as exc:
            rep = VerificationReport(f"limit[{a},{b};ab={ab}]",
                                     "classical-limit", False, None,
                                     float("nan"), notes=[str(exc)])
        out.append(rep)
    return out


def _emit_json(path: str, payload: dict) -> None:
    blob = json.dumps(payload, sort_keys=True, indent=1)
    if path == "-":
        sys.stdout.write(blob + "\n")
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(blob + "\n")


def _print_report_lines(reports):
    for rep in reports:
        mark = "PASS" if rep.passed else "FAIL"
        extra = ""
        if rep.kind == "classical-limit" and rep.limit_fit:
            extra = f" order={_fmt(rep.limit_fit['order'])}"
        print(f"{mark} {rep.rel_id} kind={rep.kind} "
              f"max_rel_err={_fmt(rep.max_rel_err)}{extra}")
        for note in rep.notes:
            print(f"     note: {note}")


# ---------------------------------------------------------------------------
# subcommands

def cmd_catalog(args) -> int:
    df, params, cat, rels, comms, hbars = _bind_session(args)
    print(f"level k = {params.k}, hbar = {', '.join(str(h) for h in hbars)}")
    for name in sorted(cat.currents):
        cur = cat.currents[name]
        print(f"current {name}: {len(cur.terms)} term(s)")
        for i, term in enumerate(cur.terms):
            pref = f"{term.coeff!r}"
            if term.hbar_power:
                pref += f"*hbar^{term.hbar_power}"
            print(f"  term {i}: prefactor {pref}")
            for fam, mf in sorted(term.exponents.items()):
                lat, pos, neg = mf.canonical()
                for label, branch in (("t>0", pos), ("t<0", neg)):
                    for hpow, lr in sorted(branch.items()):
                        print(f"    {fam} {label}: hbar^{hpow} * [{lr!r}], "
                              f"zeta = exp(h t/{2 * lat})")
    return 0


def cmd_contract(args) -> int:
    df, params, cat, rels, comms, hbars = _bind_session(args)
    a, b = args.currents
    if a not in cat.currents or b not in cat.currents:
        raise CosetForgeError(f"unknown currents {a!r}, {b!r}")
    if args.at:
        re, im = (float(x) for x in args.at.split(","))
        w = complex(re, im)
    else:
        w = None
    ca, cb = cat[a], cat[b]
    if len(ca.terms) != 1 or len(cb.terms) != 1:
        raise CosetForgeError("contract expects primitive currents")
    printed = False
    for fam in cat.kernels:
        fa = ca.terms[0].exponents.get(fam)
        fb = cb.terms[0].exponents.get(fam)
        if fa is None or fb is None:
            continue
        I = contract(fa, fb, cat.kernels[fam], params)
        if I.is_zero():
            print(f"family {fam}: zero contraction")
            continue
        sf = closed_form(I, params)
        bound = I.strip_bound(params.hbar_float)
        wv = w if w is not None else complex(0.7, -(max(bound, 0.0) + 1.0))
        q = quad_eval(I, wv, params)
        c = sf.log_eval(wv, params.hbar_float)
        print(f"family {fam}: strip Im w < {_fmt(-bound)}; at w = {wv}")
        print(f"  log divergence coeff a = {I.log_divergence_coeff}")
        print(f"  quadrature   exp(I) = {cmath.exp(q)}")
        print(f"  closed form  value  = {cmath.exp(c)}")
        print(f"  closed form  = {sf.describe()}")
        printed = True
    if not printed:
        print("currents share no kernel family; all contractions vanish")
    return 0


def cmd_verify(args) -> int:
    df, params, cat, rels, comms, hbars = _bind_session(args)
    if args.relation:
        rels = [r for r in rels if r.rel_id == args.relation]
        if not rels:
            raise CosetForgeError(f"no relation named {args.relation!r}")
        comms = []
    reports = _run_relations(cat, rels, args, workers=args.workers)
    if not args.relation:
        reports += _run_commutators(cat, comms, args)
    _print_report_lines(reports)
    ok = all(r.passed for r in reports)
    if args.json:
        payload = _payload(params, hbars, reports)
        _emit_json(args.json, payload)
    print(("all relations hold" if ok else "verification FAILED"))
    return 0 if ok else 1


def cmd_poles(args) -> int:
    df, params, cat, rels, comms, hbars = _bind_session(args)
    if not comms:
        raise CosetForgeError("no commutator_delta declaration in the file")
    reports = _run_commutators(cat, comms, args)
    for rep in reports:
        _print_report_lines([rep])
        for p in rep.poles:
            print(f"  pole at w = {p['w_exact']}; numeric |err| = {_fmt(p['abs_err'])}")
        for r in rep.residue_ops:
            print(f"  residue at w = {r['pole_w']}: scalar {r['scalar_gr']} "
                  f"* hbar^{r['scalar_hbar_power']}, matches {r['matches']}, "
                  f"derived shift {r['derived_u1_shift']}")
    ok = all(r.passed for r in reports)
    if args.json:
        _emit_json(args.json, _payload(params, hbars, reports))
    return 0 if ok else 1


def cmd_limit(args) -> int:
    df, params, cat, rels, comms, hbars = _bind_session(args)
    seq = (_parse_fraction_list(args.hbar) if args.hbar
           else [Fraction(1, 100), Fraction(1, 1000), Fraction(1, 10000)])
    if args.pair:
        a, b = args.pair.split(",")
        pairs = [(a.strip(), b.strip())]
    else:
        pairs = [(r.left_pair[0], r.left_pair[1])
                 for r in rels if r.kind == "shape"]
    reports = _run_limits(cat, seq, pairs)
    _print_report_lines(reports)
    ok = all(r.passed for r in reports)
    if args.json:
        _emit_json(args.json, _payload(params, seq, reports))
    return 0 if ok else 1


def cmd_report(args) -> int:
    df, params, cat, rels, comms, hbars = _bind_session(args)
    reports = _run_relations(cat, rels, args, workers=args.workers)
    reports += _run_commutators(cat, comms, args)
    shape_pairs = [(r.left_pair[0], r.left_pair[1])
                   for r in rels if r.kind == "shape"]
    seq = [Fraction(1, 100), Fraction(1, 1000), Fraction(1, 10000)]
    reports += _run_limits(cat, seq, shape_pairs)
    payload = _payload(params, hbars, reports)
    _emit_json(args.json or "-", payload)
    ok = all(r.passed for r in reports)
    return 0 if ok else 1


def _payload(params, hbars, reports) -> dict:
    rel_dicts = [_report_to_dict(r) for r in
                 sorted(reports, key=lambda r: (r.kind, r.rel_id))]
    flat = []
    for r in sorted(reports, key=lambda r: (r.kind, r.rel_id)):
        for w, res in zip(r.grid, r.residuals):
            flat.append({"relation": r.rel_id, "w": _fmt_c(w),
                         "residual": _fmt(res)})
    return {
        "schema_version": SCHEMA_VERSION,
        "params": {"k": str(params.k),
                   "hbar": [str(h) for h in hbars]},
        "relations": rel_dicts,
        "residuals": flat,
        "poles": [p for r in rel_dicts for p in r["poles"]],
        "limit_fits": [
            {"id": r["id"], **r["limit_fit"]}
            for r in rel_dicts if r["limit_fit"]],
        "pass": all(r["pass"] for r in rel_dicts),
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="coset-forge",
        description="verify the deformed coset vertex-operator relations")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("file", nargs="?", default=None,
                       help="definition file (.alg); defaults to the shipped catalog")
        p.add_argument("--k", default=None, help="override the level (rational)")
        p.add_argument("--hbar", default=None,
                       help="override hbar values, comma-separated rationals")
        p.add_argument("--grid-n", type=int, default=25)
        p.add_argument("--grid-range", default=None, metavar="A,B")
        p.add_argument("--tol", type=float, default=None)
        p.add_argument("--json", default=None, metavar="PATH")
        p.add_argument("--rotate", default=None,
                       choices=["none", "c-sector", "global"],
                       help="force a rotation mode on every relation")
        p.add_argument("--workers", type=int, default=4)

    p = sub.add_parser("catalog", help="print the bound current catalog")
    common(p)
    p.set_defaults(fn=cmd_catalog)

    p = sub.add_parser("contract", help="quadrature vs closed form for a pair")
    common(p)
    p.add_argument("currents", nargs=2, metavar=("A", "B"))
    p.add_argument("--at", default=None, metavar="RE,IM")
    p.set_defaults(fn=cmd_contract)

    p = sub.add_parser("verify", help="verify declared relations")
    common(p)
    p.add_argument("--all", action="store_true",
                   help="verify every declared relation (default)")
    p.add_argument("--relation", default=None, help="verify a single relation")
    p.set_defaults(fn=cmd_verify)

    p = sub.add_parser("poles", help="ordering-difference pole/residue analysis")
    common(p)
    p.set_defaults(fn=cmd_poles)

    p = sub.add_parser("limit", help="classical-limit degeneration fits")
    common(p)
    p.add_argument("--pair", default=None, metavar="A,B")
    p.set_defaults(fn=cmd_limit)

    p = sub.add_parser("report", help="full verification run as JSON")
    common(p)
    p.set_defaults(fn=cmd_report)
    return ap


def run(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as exc:
        _fail(args, "parse", exc)
        return 2
    except (CosetForgeError, OSError, ValueError) as exc:
        _fail(args, type(exc).__name__, exc)
        return 2


def _fail(args, kind, exc):
    if getattr(args, "json", None):
        _emit_json(args.json, {
            "schema_version": SCHEMA_VERSION,
            "error": {"kind": kind, "message": str(exc)}})
    print(f"error: {exc}", file=sys.stderr)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()

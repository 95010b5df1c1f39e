"""Acceptance criteria, one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -s` to see the per-criterion
timing lines.  Every tolerance is pinned here; nothing is calibrated at
run time.
"""

import cmath
import importlib.resources
import json
import subprocess
import sys
import time
from fractions import Fraction

import pytest

from coset_forge.algebra import (ClassicalBraid, build_catalog,
                                 catalog_contraction_pairs, classical_limit,
                                 ef_commutator_analysis, builtin_relations,
                                 verify_relation)
from coset_forge.contraction import StructureFunction, closed_form, contract, quad_eval
from coset_forge.modes import AlgebraParams, equals as modes_equal, shift_argument
from test_specfun import oracle_grid, oracle_log_gamma, rel_err

KLIST = [Fraction(1), Fraction(2), Fraction(3), Fraction(5, 2)]


def _stamp(name: str, t0: float, budget: float):
    dt = time.time() - t0
    print(f"{name}: PASS ({dt:.2f} s, budget {budget:g} s)")
    assert dt < budget


def test_criterion_1_log_gamma_oracle():
    t0 = time.time()
    from coset_forge.specfun import log_gamma
    for z in oracle_grid(200, 50.0):
        assert rel_err(log_gamma(z), oracle_log_gamma(z)) <= 1e-12, z
    _stamp("criterion 1 (log_gamma vs oracle, 200 pts)", t0, 1.0)


def test_criterion_2_printed_factor_reproduction():
    t0 = time.time()
    from coset_forge.contraction import exchange_factor
    from coset_forge.exact import GR

    HALF = Fraction(1, 2)
    ONE = Fraction(1)

    def acc(pairs):
        d = {}
        for sh, e in pairs:
            d[(2 + 0j, sh)] = d.get((2 + 0j, sh), 0) + e
        return {kk: v for kk, v in d.items() if v}

    def printed_sf(pairs):
        sf = StructureFunction.one()
        for sh, e in pairs:
            sf = sf * StructureFunction.from_gamma(2, sh, e)
        return sf

    for k in KLIST:
        params = AlgebraParams(k)
        cat = build_catalog(params)
        bp = cat["beta_plus"].exponent("b")
        bm = cat["beta_minus"].exponent("b")
        lp = cat["Lambda_plus"].exponent("lambda")
        lm = cat["Lambda_minus"].exponent("lambda")
        Kb, Kl = cat.kernels["b"], cat.kernels["lambda"]

        lam_pairs = [((k + 2) / 4, 1), ((k + 6) / 4, 1), (-k / 4, 2),
                     (-(k + 2) / 4, -1), (-(k - 2) / 4, -1), ((k + 4) / 4, -2)]
        bet_pairs = [(-k / 4, 1), (-(k - 4) / 4, 1), ((k + 2) / 4, 2),
                     (k / 4, -1), ((k + 4) / 4, -1), (-(k - 2) / 4, -2)]
        S_l = exchange_factor(lp, lm, Kl, params)
        S_b = exchange_factor(bp, bm, Kb, params)
        # exact symbolic equality with the printed product at every level
        assert S_l.symbolic_eq(printed_sf(lam_pairs)), k
        assert S_b.symbolic_eq(printed_sf(bet_pairs)), k
        if k != 2:  # away from the degenerate level the raw multiset matches
            assert {(complex(s), sh): e for (s, sh), e in S_l.gammas.items()} \
                == acc(lam_pairs)
            assert {(complex(s), sh): e for (s, sh), e in S_b.gammas.items()} \
                == acc(bet_pairs)
            assert not S_l.linears and S_l.const.is_one()
            assert not S_b.linears and S_b.const.is_one()

        # rational beta/screened factors, symbolically
        Bp = cat["B_plus"].exponent("b")
        Bm = cat["B_minus"].exponent("b")

        def lin(r, e=1):
            return StructureFunction.from_linear(GR.of(r), e)

        checks = [
            (exchange_factor(bp, Bp, Kb, params),
             lin(k / 4 + HALF) * lin(k / 4 - HALF, -1)),
            (exchange_factor(bp, Bm, Kb, params),
             lin(-k / 4 - HALF) * lin(-k / 4 + HALF, -1)),
            (exchange_factor(Bp, bm, Kb, params),
             lin(k / 4 + HALF) * lin(k / 4 - HALF, -1)),
            (exchange_factor(Bm, bm, Kb, params),
             lin(-k / 4 - HALF) * lin(-k / 4 + HALF, -1)),
        ]
        for got, expect in checks:
            assert got.symbolic_eq(expect), k
    _stamp("criterion 2 (printed Gamma multisets and rational factors)", t0, 5.0)


def test_criterion_3_oracle_agreement_full_catalog():
    t0 = time.time()
    for k in KLIST:
        for hbar in (Fraction(1), Fraction(1, 2)):
            params = AlgebraParams(k, hbar)
            cat = build_catalog(params)
            pairs = catalog_contraction_pairs(cat)
            assert len(pairs) >= 20
            hf = params.hbar_float
            for label, fam, f, g, K in pairs:
                I = contract(f, g, K, params)
                if I.is_zero():
                    continue
                sf = closed_form(I, params)
                base = max(0.0, I.strip_bound(hf))
                for j in range(20):
                    w = complex((-2.0 + 4.0 * j / 19) * hf * max(1.0, float(k)),
                                -(base + (0.3 + 0.45 * (j % 5) / 5) * hf
                                  * max(1.0, float(k))))
                    q = cmath.exp(quad_eval(I, w, params))
                    c = sf.eval(w, hf)
                    assert abs(q - c) <= 1e-8 * abs(c), (label, k, hbar, w)
    _stamp("criterion 3 (quadrature vs closed form, full catalog)", t0, 60.0)


def test_criterion_4_nonlocal_shape_relations():
    t0 = time.time()
    for k in KLIST:
        cat = build_catalog(AlgebraParams(k))
        for pair in (("psi", "psi"), ("psi", "psi_dag"), ("psi_dag", "psi_dag")):
            facs = cat.pair_exchange(cat[pair[0]], cat[pair[1]], rotate="none")
            base = facs[0]
            hbar = 1.0
            for sf in facs[1:]:
                assert (sf * base.inverse()).normalize().is_one(), (k, pair)
                for j in range(6):
                    w = complex(0.4 * j - 1.0, -0.7 - 0.2 * j) * max(1.0, float(k))
                    a = sf.eval(w, hbar)
                    b = base.eval(w, hbar)
                    assert abs(a - b) <= 1e-8 * abs(b)
    _stamp("criterion 4 (single shared factor for the nonlocal currents)", t0, 30.0)


def test_criterion_5_rational_relations_gamma_emptiness():
    t0 = time.time()
    recorded_hh = {}
    for k in KLIST:
        cat = build_catalog(AlgebraParams(k))
        rels = {r.rel_id: r for r in builtin_relations(k)}
        for rid in ("H_p_H_p", "H_m_H_m", "H_p_H_m", "H_m_H_p", "H_p_E",
                    "H_m_E", "H_p_F", "H_m_F", "E_E", "F_F"):
            rel = rels[_relid_map(rid)]
            # exact Gamma-multiset emptiness on every term pair
            a, b = rel.left_pair
            for sf in cat.pair_exchange(cat[a], cat[b], rotate="none"):
                assert not sf.normalize().gammas, (k, rid)
            rep = verify_relation(cat, rel)
            assert rep.passed and rep.symbolic_pass, (k, rid)
            assert rep.max_rel_err <= 1e-8
            if rid == "H_p_H_m":
                recorded_hh[k] = rep.derived_factor
    # the engine records its derived factor where the printed text is malformed
    assert all(recorded_hh.values())
    print("  derived H+H- factor at k=2:", recorded_hh[Fraction(2)])
    _stamp("criterion 5 (rational relations, exact Gamma cancellation)", t0, 60.0)


def _relid_map(rid: str) -> str:
    return {
        "H_p_H_p": "H_p.H_p", "H_m_H_m": "H_m.H_m", "H_p_H_m": "H_p.H_m",
        "H_m_H_p": "H_m.H_p", "H_p_E": "H_p.E", "H_m_E": "H_m.E",
        "H_p_F": "H_p.F", "H_m_F": "H_m.F", "E_E": "E.E", "F_F": "F.F",
    }[rid]


def test_criterion_6_ordering_difference_structure():
    t0 = time.time()
    for k in (Fraction(2), Fraction(3), Fraction(5, 2)):
        params = AlgebraParams(k)
        cat = build_catalog(params)
        rep = ef_commutator_analysis(cat)
        assert rep.passed, (k, rep.notes)
        hbar = params.hbar_float
        ws = sorted(p["w_exact"].real for p in rep.poles)
        assert len(rep.poles) == 2
        assert abs(ws[0] + float(k / 2) * hbar) <= 1e-6 * hbar
        assert abs(ws[1] - float(k / 2) * hbar) <= 1e-6 * hbar
        assert all(abs(p["w_exact"].imag) <= 1e-12 for p in rep.poles)
        assert all(p["abs_err"] <= 1e-6 * hbar for p in rep.poles)
        # symbolic residue operators: scalars +-(1/hbar), U(1) exponents
        # matched exactly by modes equality at the derived arguments
        for r in rep.residue_ops:
            assert r["matches"], (k, r)
            assert r["scalar_hbar_power"] == -1
            assert r["scalar_gr"] in ("1", "-1")
            assert r["sector_exponents_vanish"]
        shifts = sorted(r["derived_u1_shift"] for r in rep.residue_ops)
        assert shifts == sorted([str(k / 4), str(-k / 4)])
        # independent exact identity behind the match
        cp, cm = cat["C_plus"].exponent("c"), cat["C_minus"].exponent("c")
        hp = cat["H_plus"].exponent("c")
        assert modes_equal(cp + shift_argument(cm, k / 2),
                           shift_argument(hp, k / 4))
    _stamp("criterion 6 (ordering-difference poles and residues)", t0, 30.0)


def test_criterion_7_classical_limit():
    t0 = time.time()
    seq = [Fraction(1, 100), Fraction(1, 1000), Fraction(1, 10000)]
    for k in (Fraction(2), Fraction(3)):
        cat = build_catalog(AlgebraParams(k))
        for pair, ab in ((("psi", "psi"), 1), (("psi", "psi_dag"), -1)):
            braid = ClassicalBraid(1, ab, k)
            rep = classical_limit(cat, pair, braid, seq, w=1.0 + 0.002j)
            assert rep.passed, (k, pair)
            fit = rep.limit_fit
            if fit.get("skipped"):
                # factor equals the braiding phase identically (free-fermion
                # point); convergence is immediate
                assert max(fit["errors"]) < 1e-12
            else:
                assert fit["order"] >= 0.9, (k, pair, fit)
    _stamp("criterion 7 (degeneration to parafermion braiding)", t0, 30.0)


def _run_cli(*args):
    return subprocess.run([sys.executable, "-m", "coset_forge.cli", *args],
                          capture_output=True, text=True)


def test_criterion_8_cli_contract(tmp_path):
    t0 = time.time()
    out = _run_cli("verify", "--all")
    assert out.returncode == 0, out.stdout + out.stderr

    shipped = (importlib.resources.files("coset_forge") / "data"
               / "paper.alg").read_text()
    perturbed = shipped.replace("Gamma(x@k + 1 + 1/k) * ",
                                "Gamma(x@k + 1 + 2/k) * ", 1)
    assert perturbed != shipped
    bad = tmp_path / "perturbed.alg"
    bad.write_text(perturbed)
    out_bad = _run_cli("verify", "--all", str(bad))
    assert out_bad.returncode == 1
    assert "FAIL C_p_C_p" in out_bad.stdout

    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert _run_cli("report", "--json", str(a)).returncode == 0
    assert _run_cli("report", "--json", str(b)).returncode == 0
    assert a.read_bytes() == b.read_bytes()
    payload = json.loads(a.read_text())
    assert payload["pass"] is True
    _stamp("criterion 8 (CLI verify/report behavior)", t0, 120.0)

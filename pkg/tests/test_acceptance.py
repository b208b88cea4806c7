"""Acceptance criteria 1-11, one test each (plus the ledgered expected failures).

Each test records a one-line verdict that is printed in the terminal summary
under "acceptance criteria".
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import brute_maximal, record_criterion
from rdfextrap.cli_harness import run_suite
from rdfextrap.extrapolate import (construct_ap_weight, construct_aprs_weight, estimate_K, rdf_iterate)
from rdfextrap.lattice import Grid, cube_basis, dyadic_basis
from rdfextrap.maximal import maximal, rescaling_check, self_improve_series
from rdfextrap.spaces import (Block, Lorentz, Morrey, VariableLebesgue, WeightedLebesgue,
                              block_power_dual_oracle, kothe_dual_norm_oracle, product_norm)
from rdfextrap.sparse_ops import dominated_by_sparse, riesz_form_constant, sparse_select
from rdfextrap.weights import (a1_constant, aprs_constant, fujii_wilson_constant, interpolate_weights,
                               power_weight_in_aprs, reverse_holder_constant,
                               symmetric_exponent)

SCEN = Path(__file__).resolve().parents[1] / "scenarios"


def _finish(key: str, failures: list, detail: str) -> None:
    ok = not failures
    record_criterion(key, ok, detail if ok else f"{detail}; first failure: {failures[0]}")
    assert ok, failures[:5]


def _failed_checks(cert) -> list:
    return [c.to_dict() for c in cert.checks if not c.advisory and not c.passed]


# ---------------------------------------------------------------------------


def test_criterion_1_rdf_certificate():
    t0 = time.perf_counter()
    failures, worst = [], -np.inf
    seed = 0
    for d, n in [(1, 8), (1, 16), (2, 8), (2, 16)]:
        b = dyadic_basis(Grid.unit(d, n))
        for _ in range(50):
            rng = np.random.default_rng(seed)
            f = np.exp(rng.normal(size=n**d)) * (rng.random(n**d) < 0.7)
            if not f.any():
                f[0] = 1.0
            K = 0.6 + 3 * rng.random()
            res = rdf_iterate(f, b, 1.0, K)
            worst = max(worst, res.slack)
            gap = float(np.max(maximal(res.R, b) - 2 * K * res.R) / res.R.max())
            if res.slack > 1e-10 or gap > 1e-10:
                failures.append((d, n, seed, res.slack, gap))
            seed += 1
    elapsed = time.perf_counter() - t0
    if elapsed >= 30:
        failures.append(("runtime", elapsed))
    _finish("1", failures, f"200 functions, max slack {worst:.2e}, {elapsed:.1f} s")


def test_criterion_2_ap_certificate():
    g = Grid.centered(1, 16)
    b = dyadic_basis(g)
    rng = np.random.default_rng(2)
    w = np.exp(0.5 * rng.normal(size=16))
    spaces = [WeightedLebesgue(g, 1.5), WeightedLebesgue(g, 3.0, w), Lorentz(g, 3.0, 2.0)]
    failures, count = [], 0
    for X in spaces:
        K1 = estimate_K(X, b)
        K2 = estimate_K(X.dual(), b)
        for k in range(34 if X is not spaces[-1] else 32):
            f = np.exp(rng.normal(size=16))
            gg = np.exp(rng.normal(size=16))
            cert = construct_ap_weight(f, gg, X, 2.0, b, K1, K2)
            count += 1
            if not cert.passed:
                failures.append((X.describe(), k, _failed_checks(cert)))
    _finish("2", failures, f"{count} (f, g) pairs over L^3/2, L^3_w, L^(3,2)")


def test_criterion_3_limited_range():
    g = Grid.centered(1, 16)
    b = dyadic_basis(g)
    rng = np.random.default_rng(3)
    w = np.exp(0.5 * rng.normal(size=16))
    X = WeightedLebesgue(g, 3.0, w)
    failures = []
    cases = [(X, 1.0, 4.0), (X, 0.5, np.inf), (X, 2.0, 6.0), (Lorentz(g, 3.0, 2.0), 1.0, 4.0)]
    for Y, r, s in cases:
        for k in range(5):
            cert = construct_aprs_weight(np.exp(rng.normal(size=16)), None, Y, 3.0, r, s, b)
            if not cert.passed:
                failures.append((Y.describe(), r, s, k, _failed_checks(cert)))
    worst = 0.0
    for k in range(10):
        f, gg = np.exp(rng.normal(size=16)), np.exp(rng.normal(size=16))
        a = construct_ap_weight(f, gg, X, 2.0, b, 1.8, 1.6)
        c = construct_aprs_weight(f, gg, X, 2.0, 1.0, np.inf, b, 1.8, 1.6)
        dev = float(np.max(np.abs(c.weight - a.weight) / a.weight))
        worst = max(worst, dev)
        if dev > 1e-12:
            failures.append(("reduction", k, dev))
    _finish("3", failures, f"(1,4), (1/2,inf), (2,6) certificates; (1,inf) reduction dev {worst:.1e}")


def test_criterion_4_weight_identities():
    b = dyadic_basis(Grid.unit(1, 16))
    rng = np.random.default_rng(4)
    failures = []
    exps = [(2.0, 1.0, 4.0), (3.0, 1.5, 6.0), (1.5, 0.5, np.inf)]
    weights = [np.exp(rng.normal(scale=0.8, size=16)) for _ in range(100)]
    for i, w in enumerate(weights):
        v = weights[(i + 1) % 100]
        c = aprs_constant(w, 2.0, 1, np.inf, b)
        if c < 1 - 1e-12:
            failures.append(("ge1", i, c))
        if abs(c - aprs_constant(1 / w, 2.0, 1, np.inf, b)) > 1e-12 * c:
            failures.append(("full-range symmetry", i))
        for p, r, s in exps:
            cl = aprs_constant(w, p, r, s, b)
            ct = aprs_constant(1 / w, symmetric_exponent(p, r, s), r, s, b)
            if abs(cl - ct) > 1e-12 * cl:
                failures.append(("limited-range symmetry", i, p, r, s))
            C = reverse_holder_constant(w, p, r, s, b)
            cinf = aprs_constant(w, p, r, np.inf, b)
            if max(C, cinf) > cl * (1 + 1e-12) or cl > C * cinf * (1 + 1e-12):
                failures.append(("two-sided", i, p, r, s))
            if not interpolate_weights(w, v, p, r, s, b).holds:
                failures.append(("interpolation", i, p, r, s))
        if fujii_wilson_constant(w, b) > a1_constant(w, b) * (1 + 1e-12):
            failures.append(("fujii-wilson", i))
    _finish("4", failures, "100 weights, all identities within 1e-12")


def test_criterion_5_duality_oracle():
    g = Grid.unit(1, 16)
    rng = np.random.default_rng(5)
    failures, worst = [], 0.0
    spaces = [WeightedLebesgue(g, 3.0, np.exp(rng.normal(size=16))),
              WeightedLebesgue(g, 1.5, np.exp(rng.normal(size=16))),
              Lorentz(g, 3.0, 3.0, np.exp(0.3 * rng.normal(size=16))),
              Lorentz(g, 1.5, 1.5),
              VariableLebesgue(g, 2.5 + 0.5 * np.sin(np.arange(16)), np.exp(0.3 * rng.normal(size=16))),
              VariableLebesgue(g, np.linspace(1.3, 2.2, 16))]
    for X in spaces:
        for k in range(3):
            gg = np.exp(rng.normal(size=16))
            oracle = kothe_dual_norm_oracle(X, gg).value
            closed = X.dual().norm(gg)
            dev = abs(oracle - closed) / closed
            worst = max(worst, dev)
            if dev > 1e-6:
                failures.append((X.describe(), k, dev))
    # the block-space pair on the all-cubes basis of an 8-cell grid
    g8 = Grid.unit(1, 8)
    cb = cube_basis(g8)
    v = np.exp(0.3 * rng.normal(size=8))
    for p, q, r in [(2.0, 4 / 3, 1.0), (3.0, 1.5, 1.2), (2.0, 2.0, 2.0)]:
        B = Block(cb, p, q, v)
        M = Morrey(cb, 1 / (1 - r / p), 1 / (1 - r / q), v ** (-r)) if r < q else None
        for k in range(2):
            gg = np.exp(rng.normal(size=8))
            if M is not None:
                oracle = block_power_dual_oracle(B, r, gg).value
                closed = M.norm(gg)
                dev = abs(oracle - closed) / closed
                worst = max(worst, dev)
                if dev > 1e-6:
                    failures.append(("block power", p, q, r, k, dev))
            two = abs(B.norm(gg) - B.decomposition_norm(gg)) / B.norm(gg)
            worst = max(worst, two)
            if two > 1e-6:
                failures.append(("block two programs", p, q, k, two))
    _finish("5", failures, f"L^p_w, Lorentz p=q, variable, Morrey/Block; max rel dev {worst:.1e}")


@pytest.mark.xfail(strict=True, reason="closed-form Lorentz dual for p != q is only an equivalent norm")
def test_criterion_5_lorentz_off_diagonal():
    g = Grid.unit(1, 16)
    rng = np.random.default_rng(55)
    X = Lorentz(g, 3.0, 2.0)
    devs = []
    for _ in range(3):
        gg = np.exp(rng.normal(size=16))
        devs.append(abs(kothe_dual_norm_oracle(X, gg).value - X.dual().norm(gg)) / X.dual().norm(gg))
    record_criterion("5 (Lorentz p != q)", max(devs) <= 1e-6,
                     f"expected failure, max rel dev {max(devs):.2e} (ledgered)")
    assert max(devs) <= 1e-6


def test_criterion_6_lozanovskii():
    g = Grid.unit(1, 16)
    failures, worst = [], 0.0
    for seed in range(50):
        rng = np.random.default_rng(600 + seed)
        h = np.exp(rng.normal(size=16))
        l1 = g.cell_measure * h.sum()
        for X in (WeightedLebesgue(g, 1 + 3 * rng.random(), np.exp(rng.normal(size=16))),
                  VariableLebesgue(g, 1.5 + rng.random(16), np.exp(0.5 * rng.normal(size=16)))):
            res = product_norm([X, X.dual()], h)
            rel = res.upper / l1 - 1
            worst = max(worst, rel)
            if not (-1e-12 <= rel <= 1e-3):
                failures.append((X.describe(), seed, rel))
    _finish("6", failures, f"50 seeds on L^p_w and L^p(.), max excess {worst:.1e}")


def test_criterion_7_self_improvement():
    b = dyadic_basis(Grid.unit(1, 16))
    failures, worst = [], 0.0
    K = 1.0  # ||M||_{L^inf -> L^inf}
    for q in (2.0, 4.0):
        C1 = 2 * K * (1 - 1 / q)  # C1 q' = 2K
        for seed in range(100):
            f = np.exp(np.random.default_rng(700 + seed).normal(size=16))
            res = self_improve_series(f, b, q, C1)
            worst = max(worst, res.c2)
            if res.c2 > 2.0:
                failures.append((q, seed, res.c2))
    rng = np.random.default_rng(77)
    g = Grid.unit(1, 16)
    worst_r = 0.0
    for X in (WeightedLebesgue(g, 3.0, np.exp(rng.normal(size=16))), Lorentz(g, 3.0, 2.0),
              VariableLebesgue(g, np.linspace(2, 3, 16))):
        for q in (0.5, 2.0):
            for rec in rescaling_check(X, b, q, [np.exp(rng.normal(size=16)) for _ in range(5)]):
                worst_r = max(worst_r, rec.rel_err)
                if rec.rel_err > 1e-10:
                    failures.append(("rescaling", X.describe(), q, rec.rel_err))
    _finish("7", failures, f"max C2* {worst:.3f} (<= 2); rescaling max rel err {worst_r:.1e}")


def test_criterion_8_sparse():
    b = dyadic_basis(Grid.unit(1, 16))
    failures = []
    a = 4.0
    for seed in range(100):
        f = np.exp(2 * np.random.default_rng(800 + seed).normal(size=16))
        fam = sparse_select(f, b, a)
        if fam.check() != (True, True) or fam.eta < 0.5:
            failures.append(("family", seed, fam.eta))
        if dominated_by_sparse(f, fam, a) > a:
            failures.append(("domination", seed))
    drift = {}
    for lam in (0.25, 0.5):
        c16 = riesz_form_constant(Grid.centered(1, 16), lam, pairs=40, seed=8)
        c32 = riesz_form_constant(Grid.centered(1, 32), lam, pairs=40, seed=8)
        drift[lam] = c32 / c16 - 1
        if abs(drift[lam]) > 0.1:
            failures.append(("form constant", lam, c16, c32))
    _finish("8", failures, "100 families exact; form constant drift "
            + ", ".join(f"lam={k}: {v:+.1%}" for k, v in drift.items()))


def _desk() -> dict:
    return json.loads((SCEN / "desk.json").read_text())


def _extrapolation_runs(runs: list) -> list:
    sc = _desk()
    sc["suites"]["extrapolation"] = {"runs": runs}
    rep = run_suite(sc, "extrapolation")
    return [r for r in rep.records if not r.passed], len(rep.records)


FOUR = [{"space": "L3_v", "p": 2}, {"space": "lorentz_3_2", "p": 2}, {"space": "variable", "p": 2.5},
        {"space": "morrey", "p": 2, "r": 1.5, "battery": 2, "K_policy": {"starts": 2, "iters": 20}}]


def test_criterion_9_transfer():
    bad, n = _extrapolation_runs([dict(run, mode="strong") for run in FOUR])
    failures = [(r.name, r.lhs, r.rhs) for r in bad]
    rz = run_suite(json.loads((SCEN / "riesz.json").read_text()), "offdiag-riesz")
    failures += [(r.name, r.lhs, r.rhs) for r in rz.records if not r.passed]
    sc = json.loads((SCEN / "riesz.json").read_text())
    sc["suites"]["offdiag-riesz"]["betas"] = [-0.1, 0.35]
    inside = run_suite(sc, "offdiag-riesz")
    failures += [(r.name, r.lhs, r.rhs) for r in inside.records if not r.passed]
    verdicts = {}
    for beta in (0.6, -0.4):
        verdicts[beta] = power_weight_in_aprs(beta, 2.0, 1.0, 4.0).verdict
        if verdicts[beta] != "outside":
            failures.append(("growth verdict", beta, verdicts[beta]))
    sc["suites"]["offdiag-riesz"]["betas"] = [0.6]
    out = run_suite(sc, "offdiag-riesz")
    if not any("outside" in r.name and not r.passed for r in out.records):
        failures.append(("outside beta not reported failing", 0.6))
    _finish("9", failures, f"{n} transfer checks on L^3_v, L^(3,2)_v, L^p(.), Morrey; "
            f"Riesz beta in {{-0.1, 0.2, 0.35}} pass; beta 0.6, -0.4 fail by growth")


def test_criterion_10_multilinear():
    sc = _desk()
    sc["suites"]["multilinear"] = {"seeds": 50, "params": [[2, 1, 4], [2, 1, 4]], "space_p": 1.5}
    rep = run_suite(sc, "multilinear")
    failures = [(r.name, r.lhs, r.rhs) for r in rep.records if not r.passed]
    _finish("10", failures, f"50 seeds, {len(rep.records)} checks, target exponent 0.75")


def test_criterion_11_weak_and_fubini():
    runs = [dict(run, mode="weak") for run in FOUR] + [{"space": "L3_v", "p": 2, "mode": "fubini"}]
    bad, n = _extrapolation_runs(runs)
    failures = [(r.name, r.lhs, r.rhs) for r in bad]
    sc = _desk()
    sc["suites"]["extrapolation"] = {"runs": runs[-1:]}
    fub = [r for r in run_suite(sc, "extrapolation").records if "fubini-identity" in r.name]
    worst = max(r.lhs for r in fub)
    if not fub or worst > 1e-12:
        failures.append(("fubini identity", worst))
    _finish("11", failures, f"{n} weak/Fubini checks; Fubini two-route deviation {worst:.1e}")


def test_criterion_brute_force_oracle_agrees():
    # the acceptance maximal checks rely on maximal(); pin it to the loop oracle once
    b = dyadic_basis(Grid.unit(1, 16))
    f = np.exp(np.random.default_rng(0).normal(size=16))
    np.testing.assert_allclose(maximal(f, b), brute_maximal(f, 16), rtol=1e-13)

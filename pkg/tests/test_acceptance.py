"""Acceptance criteria, one reported line per claim.

Each check returns (passed, detail).  The line is echoed and collected for
the terminal summary.  Claims that do not hold are marked strict xfail with
the ledger entry that explains them, so the suite stays green while the
failure stays visible.
"""

import hashlib
import json
import random
from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from conftest import ACCEPTANCE_LINES
from regimes import ELLIPTIC, STEPS, start_point
from scipy.linalg import subspace_angles

from h6sym.algebra import (
    GENERATORS,
    ModelContext,
    PhasePoint,
    canonical_bracket,
    casimir_poly,
    generator_poly,
    lie_poisson_bracket,
    realize_poly,
)
from h6sym.classify import (
    calM,
    closure_probe,
    expected_search_vectors,
    invariant_search,
    mn_det,
    pde_residual,
    raw_expr,
)
from h6sym.cli import main
from h6sym.continuum import ScalingRule, convergence_order, expansion_check, i2ii_identity_gap
from h6sym.dynamics import closure_check, closure_scale, trajectory
from h6sym.invariants import (
    bracket_pair,
    commuting_members,
    conservation_report,
    expected_rank,
    independence_test,
    involution_test,
    numerical_rank,
    registered_ids,
)
from h6sym.polynomial import MultiPoly
from h6sym.potentials import V1, V2I, V2II

LEDGER = "see /root/notes/decisions.md"


def report(label, passed, detail):
    line = f"{'PASS' if passed else 'FAIL'}  {label}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return passed


# 1 algebra axioms


def _random_gen_poly(rng):
    terms = {}
    for _ in range(3):
        e = [0] * 6
        for _ in range(rng.randint(1, 3)):
            e[rng.randrange(6)] += 1
        terms[tuple(e)] = rng.randint(-3, 3) or 1
    return MultiPoly(GENERATORS, terms)


def test_c1_algebra_axioms():
    rng = random.Random(0)
    L = lie_poisson_bracket
    bad = 0
    for _ in range(50):
        a, b, c = (_random_gen_poly(rng) for _ in range(3))
        ok = (
            L(a, b) == -L(b, a)
            and L(a, b * c) == L(a, b) * c + b * L(a, c)
            and (L(a, L(b, c)) + L(b, L(c, a)) + L(c, L(a, b))).is_zero()
        )
        bad += not ok
    C = casimir_poly()
    central = all(L(C, generator_poly(x)).is_zero() for x in GENERATORS)
    assert report("C1 algebra axioms", bad == 0 and central,
                  f"{50 - bad}/50 triples exact; Casimir central: {central}")


# 2 realization


def test_c2_realization_morphism():
    failures = 0
    for n in (1, 2, 3):
        ctx = ModelContext.default(n, exact=True)
        for x, y in combinations(GENERATORS, 2):
            lhs = canonical_bracket(realize_poly(generator_poly(x), ctx), realize_poly(generator_poly(y), ctx))
            failures += lhs != realize_poly(lie_poisson_bracket(generator_poly(x), generator_poly(y)), ctx)
    trivial = all(realize_poly(casimir_poly(), ModelContext.default(n, exact=True)).is_zero() for n in (1, 2))
    assert report("C2 realization morphism", failures == 0 and trivial,
                  f"{failures} failing pairs over N=1..3; D(C)=0 for N=1,2: {trivial}")


# 3 closure


def test_c3_closure():
    ctx = ModelContext.default(5)
    rng = np.random.default_rng(0)
    worst = {}
    for fam, (spec, _) in ELLIPTIC.items():
        rel = 0.0
        for _ in range(20):
            pt = PhasePoint.from_array(rng.uniform(-1, 1, 10))
            rel = max(rel, closure_check(pt, spec, ctx) / closure_scale(pt, spec, ctx))
        worst[fam] = rel
    m = max(worst.values())
    assert report("C3 coalgebra closure", m < 1e-10, f"max relative gap {m:.2e} over 7 families x 20 points")


# 4 conservation


def test_c4_conservation():
    ctx = ModelContext.default(4)
    worst = 0.0
    for fam, (spec, eq) in ELLIPTIC.items():
        ids = registered_ids(fam, 4)
        drift = conservation_report(trajectory(start_point(eq), spec, ctx, STEPS, ids))
        worst = max(worst, max(drift.values()))
    spec = ELLIPTIC["V2II"][0]
    params = dict(spec.params(), varkappa=0.1, alpha_plus=0.2)
    control = conservation_report(trajectory(start_point(), spec, ctx, STEPS, ["I1"], params))["I1"]
    ok = worst < 1e-7 and control > 1e-3
    assert report("C4 conservation", ok,
                  f"max drift {worst:.2e} over 7 families x 1e4 steps; I1 on V2II drifts {control:.2e}")


# 5 rank


PARAMS = {"varkappa": 0.7, "alpha_plus": 0.3, "kappa": 0.4, "eta": 0.3, "zeta": 0.2, "alpha": 0.5}
SETS = ["S1-QMS", "S2I", "S3", "S1s", "S2Is", "S2IIs"]


def test_c5_rank_counts():
    rows = []
    ok = True
    for n in (4, 5):
        for name in SETS:
            modes = {independence_test(name, ModelContext.default(n), PARAMS, 5, 0, tol).mode
                     for tol in (1e-6, 1e-7, 1e-8, 1e-9, 1e-10)}
            good = modes == {expected_rank(name, n)}
            ok &= good
            rows.append(f"{name}@{n}={sorted(modes)}")
    assert report("C5 rank counts", ok, "tolerance-stable modes " + " ".join(rows))


# 6 involution


def test_c6a_exact_involution():
    ctx = ModelContext.default(4, exact=True)
    p = {k: Fraction(v) for k, v in PARAMS.items()}
    pairs = [("I2IIa", "I2IIb"), ("I2I", "I1s")] + list(combinations(["Cleft(3)", "Cleft(4)"], 2))
    res = [bracket_pair(a, b, ctx, p, mode="exact") for a, b in pairs]
    ok = all(r["pass"] for r in res)
    assert report("C6a exact involution", ok, f"{sum(r['pass'] for r in res)}/{len(res)} pairs are the zero polynomial at N=4")


@pytest.mark.xfail(strict=True, reason=f"J1 and J1hat do not Poisson-commute; {LEDGER}")
def test_c6b_s1qms_involution():
    ok, worst = True, {}
    for n in (4, 5):
        res = involution_test("S1-QMS", ModelContext.default(n), PARAMS, mode="numeric", samples=10)
        for r in res["brackets"]:
            key = "/".join(r["pair"])
            worst[key] = max(worst.get(key, 0.0), r["max_relative"])
        ok &= res["pass"]
    bad = {k: f"{v:.1e}" for k, v in worst.items() if v >= 1e-9}
    assert report("C6b {I1,J1,J1hat} numeric involution", ok, f"pairs above 1e-9: {bad or 'none'}")


def test_c6c_singular_involution():
    worst = 0.0
    for n in (4, 5):
        for name in ("S1s", "S2Is", "S2IIs"):
            res = involution_test(name, ModelContext.default(n), PARAMS, mode="numeric", samples=10)
            worst = max([worst] + [r["max_relative"] for r in res["brackets"]])
    assert report("C6c singular-set involution", worst < 1e-9, f"max relative bracket {worst:.2e}")


def test_c6_i1_commutes_with_both():
    ctx = ModelContext.default(4, exact=True)
    p = {"varkappa": Fraction(7, 10), "alpha_plus": Fraction(3, 10)}
    ok = all(bracket_pair("I1", x, ctx, p, mode="exact")["pass"] for x in ("J1", "J1hat", "Cleft(3)"))
    assert report("C6d I1 with J1, J1hat, Cleft(3)", ok, "exact zero brackets at N=4")


# 7 search


def test_c7_search_recovery():
    ctx = ModelContext.default(4)
    spec = V1(alpha_plus=1.0, varkappa=1.0)
    r1 = invariant_search(spec, 1, ctx, seed=0)
    v = np.array(r1.vectors[0])
    ref = expected_search_vectors("V1", spec.params(), 0.0, 1)[0]
    err1 = float(np.max(np.abs(v / v[-1] - ref / ref[-1]))) if r1.dimension == 1 else float("inf")
    spec2 = V2II(eta=1.0, zeta=1.0, kappa=1.0)
    M = float(sum(x * x for x in ctx.lam))
    r2 = invariant_search(spec2, 2, ctx, seed=0)
    angle = float(np.max(subspace_angles(expected_search_vectors("V2II", spec2.params(), M, 2).T, np.array(r2.vectors).T)))
    r3 = invariant_search(V2I(kappa=0.0), 1, ctx, seed=0)
    B = np.array(r3.vectors)
    t = np.array([0.0, 1.0, -1.0, 0.0, 0.0]) / np.sqrt(2)
    gap = float(np.linalg.norm(B.T @ (B @ t) - t))
    ok = r1.dimension == 1 and err1 < 1e-8 and angle < 1e-6 and gap < 1e-8
    assert report("C7 search recovery", ok,
                  f"V1 dim {r1.dimension} err {err1:.1e}; V2II max angle {angle:.1e}; V2I A+ - A- gap {gap:.1e}")


# 8 classification


def test_c8_classification():
    rng = random.Random(1)
    det_ok = all(
        len(set(mn_det(n, Fraction(rng.randint(-9, 9), rng.randint(1, 9)), Fraction(rng.randint(-9, 9), rng.randint(1, 9))))) == 1
        for n in range(1, 11) for _ in range(20)
    )
    nrng = np.random.default_rng(1)
    special = all(numerical_rank(calM(np.ones(n), np.eye(n)[0]), 1e-10) == n - 2 for n in range(3, 9))
    bounds = all(
        n - 2 <= numerical_rank(calM(nrng.normal(size=n), nrng.normal(size=n)), 1e-10) <= n
        for n in range(3, 9) for _ in range(100)
    )
    ctx = ModelContext.default(4)
    pde = max(max(pde_residual(spec, nrng.uniform(-1, 1, 4), ctx).relative()) for spec, _ in ELLIPTIC.values())
    cubic = pde_residual(raw_expr("q1^3", 3), np.ones(3), ModelContext((1.0, 2.0, 3.0))).nonlinear
    q0, q1 = nrng.uniform(0.5, 1.5, 3), nrng.uniform(0.5, 1.5, 3)
    ident, quad = closure_probe("identity", q0, q1), closure_probe("quadratic", q0, q1)
    ok = det_ok and special and bounds and pde < 1e-10 and abs(cubic) > 1e-3 and ident < 1e-12 and quad > 1e-3
    assert report("C8 classification machinery", ok,
                  f"mn_det routes agree: {det_ok}; calM special rank N-2: {special}; bounds: {bounds}; "
                  f"pde max rel {pde:.1e}; q1^3 residual {cubic:g}; probe id {ident:.1e} quad {quad:.2e}")


# 9 continuum

H_LIST = [0.1, 0.05, 0.025, 0.0125]
LAM = (Fraction(1), Fraction(1, 2), Fraction(1, 3))
Q = (Fraction(3, 10), Fraction(-1, 5), Fraction(1, 2))
P = (Fraction(1, 10), Fraction(2, 5), Fraction(-3, 10))
V1_RULE = ScalingRule("V1", omega=1.3, gamma=0.4)
V2II_RULE = ScalingRule("V2II", omega=1.1, gamma=0.3, delta=0.5)


def test_c9a_convergence_order():
    s1 = convergence_order(ScalingRule("V1", omega=1.0, gamma=1.0), LAM, Q, P, 1.0, H_LIST).slope
    s2 = convergence_order(V2II_RULE, LAM, Q, P, 1.0, H_LIST).slope
    ok = all(1.8 <= s <= 2.2 for s in (s1, s2))
    assert report("C9a convergence order", ok, f"slopes V1 {s1:.3f}, V2II {s2:.3f}")


def test_c9b_expansions():
    rows, ok = [], True
    for inv, rule in (("I1", V1_RULE), ("J1hat", V1_RULE), ("I2IIa", V2II_RULE), ("I2IIb", V2II_RULE)):
        r = expansion_check(inv, rule, LAM, Q, P, H_LIST)
        ok &= r.passed
        rows.append(f"{inv} lead {r.lead_computed} exact={r.lead_exact} order {r.slope:.2f}")
    assert report("C9b expansions I1, J1hat, I2IIa, I2IIb", ok, "; ".join(rows))


@pytest.mark.xfail(strict=True, reason=f"stated J1 correction is not attained; {LEDGER}")
def test_c9c_j1_expansion():
    r = expansion_check("J1", V1_RULE, LAM, Q, P, H_LIST)
    d = expansion_check("J1:derived", V1_RULE, LAM, Q, P, H_LIST)
    assert report("C9c J1 expansion as stated", r.passed,
                  f"lead exact={r.lead_exact}; residual {r.residual[-1]:.3f} at h=0.0125, order {r.slope:.2f} "
                  f"(derived correction order {d.slope:.2f})")


def test_c9d_identity():
    rng = np.random.default_rng(5)
    gap = max(i2ii_identity_gap(V2II_RULE, LAM, rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 3)) for _ in range(50))
    assert report("C9d IIa + IIb identity", gap < 1e-10, f"max gap {gap:.1e} over 50 states")


# 10 determinism


def test_c10_determinism(tmp_path, capsys):
    cfgs = {
        "v1": {"N": 4, "seed": 7, "potential": {"family": "V1", "alpha_plus": 0.3, "varkappa": 0.7}},
        "v2ii": {"N": 4, "seed": 2, "potential": {"family": "V2II", "eta": 1, "zeta": 1, "kappa": 1}},
        "cont": {"N": 3, "seed": 1, "continuum": {"family": "V2II", "omega": 1.1, "gamma": 0.3, "delta": 0.5}},
    }
    paths = {}
    for k, v in cfgs.items():
        paths[k] = tmp_path / f"{k}.json"
        paths[k].write_text(json.dumps(v))

    def run(tag):
        d = tmp_path / tag
        d.mkdir()
        argvs = [
            ["simulate", "--config", paths["v1"], "--steps", "200", "--out", d / "sim.csv"],
            ["check", "--config", paths["v1"], "--steps", "1000", "--out", d / "check.json"],
            ["rank", "--config", paths["v2ii"], "--out", d / "rank.json"],
            ["involution", "--config", paths["v2ii"], "--out", d / "inv.json"],
            ["search", "--config", paths["v2ii"], "--degree", "2", "--out", d / "search.json"],
            ["classify", "mn-det", "--n", "7", "--mu=2/3", "--nu=-5/7", "--out", d / "det.json"],
            ["classify", "calm-rank", "--n", "6", "--seed", "4", "--out", d / "calm.json"],
            ["classify", "pde-check", "--config", paths["v1"], "--out", d / "pde.json"],
            ["classify", "closure-probe", "--ell", "quadratic", "--seed", "4", "--out", d / "probe.json"],
            ["continuum", "order", "--config", paths["cont"], "--out", d / "order.csv"],
            ["continuum", "expansion", "--config", paths["cont"], "--invariant", "I2IIa", "--out", d / "exp.csv"],
        ]
        for argv in argvs:
            main([str(a) for a in argv])
        capsys.readouterr()
        return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(d.iterdir())}

    a, b = run("a"), run("b")
    ok = a == b and len(a) == 13
    assert report("C10 determinism", ok, f"{len(a)} output files, identical hashes: {a == b}")

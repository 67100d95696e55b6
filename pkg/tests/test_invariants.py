"""Named invariants: evaluation routes, conservation, rank, involution."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from regimes import ELLIPTIC, N, start_point

from h6sym.algebra import ModelContext, PhasePoint
from h6sym.dynamics import trajectory
from h6sym.invariants import (
    REGISTRY,
    bracket_pair,
    commuting_members,
    conservation_report,
    eval_invariant,
    expected_rank,
    independence_test,
    invariant_poly,
    involution_test,
    jacobian_rows,
    numerical_rank,
    parse_id,
    registered_ids,
    set_members,
)
from h6sym.potentials import V2II

PARAMS = {
    "varkappa": 0.7,
    "alpha_plus": 0.3,
    "kappa": 0.4,
    "eta": 0.3,
    "zeta": 0.2,
    "alpha": 0.5,
}


def test_i1s_vanishes_on_diagonal():
    ctx = ModelContext.default(3)
    pt = PhasePoint((0.3, -0.2, 0.9), (0.3, -0.2, 0.9))
    assert eval_invariant("I1s", pt, ctx) == pytest.approx(0.0, abs=1e-15)


def test_i1_at_origin_frozen():
    # generator form: varkappa*K with K = -M/2
    ctx = ModelContext.default(2, exact=True)
    origin = PhasePoint((Fraction(0),) * 2, (Fraction(0),) * 2)
    params = {"varkappa": Fraction(3), "alpha_plus": Fraction(1)}
    assert eval_invariant("I1", origin, ctx, params) == Fraction(-15, 8)


@pytest.mark.parametrize("name", ["I1", "I1s", "I2IIa", "I2IIb"])
def test_phase_and_generator_routes_agree(name):
    ctx = ModelContext.default(4)
    rng = np.random.default_rng(11)
    for _ in range(5):
        pt = PhasePoint.from_array(rng.uniform(-1, 1, 8))
        a = eval_invariant(name, pt, ctx, PARAMS, route="phase")
        b = eval_invariant(name, pt, ctx, PARAMS, route="generator")
        assert a == pytest.approx(b, rel=1e-12, abs=1e-12)


def test_exact_routes_agree_as_polynomials():
    ctx = ModelContext.default(3, exact=True)
    params = {"kappa": Fraction(1, 3), "eta": Fraction(2), "zeta": Fraction(-1, 2)}
    sym = PhasePoint.symbolic(3)
    for name in ("I2IIa", "I2IIb"):
        a = eval_invariant(name, sym, ctx, params, route="phase")
        b = eval_invariant(name, sym, ctx, params, route="generator")
        assert a == b


def test_parse_id_and_registry():
    assert parse_id("Cleft(3)") == ("Cleft", 3)
    assert parse_id("J1hat") == ("J1hat", None)
    with pytest.raises(ValueError):
        parse_id("I9")
    with pytest.raises(ValueError):
        eval_invariant("I1", PhasePoint((0.0,), (0.0,)), ModelContext((1.0,)), {})
    assert registered_ids("V1", 4) == ["C", "Cleft(3)", "Cleft(4)", "Cright(3)", "I1", "J1", "J1hat"]
    assert set(REGISTRY) >= {"I1", "I1s", "I2I", "I2IIa", "I2IIb", "I2Is", "I2IIs", "J1", "J1hat", "C"}


@pytest.mark.parametrize("family", sorted(ELLIPTIC))
def test_conservation_elliptic(family):
    spec, eq = ELLIPTIC[family]
    ctx = ModelContext.default(N)
    ids = registered_ids(family, N)
    tr = trajectory(start_point(eq), spec, ctx, 2000, ids)
    drift = conservation_report(tr)
    assert max(drift.values()) < 1e-7, drift


def test_negative_control_i1_on_v2ii():
    spec = V2II(eta=0.3, zeta=0.2, kappa=0.1)
    params = dict(spec.params(), varkappa=0.1, alpha_plus=0.2)
    tr = trajectory(start_point(), spec, ModelContext.default(N), 100, ["I1"], params)
    assert conservation_report(tr)["I1"] > 1e-3


def test_jacobian_rows_frozen_structure():
    ctx = ModelContext.default(4)
    pt = PhasePoint.from_array(np.linspace(-1, 1, 8))
    lam = np.array([float(x) for x in ctx.lam])
    np.testing.assert_allclose(jacobian_rows(["I1s"], pt, ctx)[0], np.concatenate([-lam, lam]))
    row = jacobian_rows(["Cleft(3)"], pt, ctx)[0]
    assert row[3] == 0 and row[7] == 0


def test_numerical_rank_basics():
    assert numerical_rank(np.eye(3)) == 3
    assert numerical_rank(np.array([[1.0, 2.0], [1.0, 2.0], [0.0, 1.0]])) == 2
    assert numerical_rank(np.zeros((2, 2))) == 0


@given(st.integers(1, 6), st.integers(1, 6), st.integers(0, 1000))
def test_numerical_rank_of_random_product(r, n, seed):
    rng = np.random.default_rng(seed)
    r = min(r, n)
    A = rng.normal(size=(n, r)) @ rng.normal(size=(r, n))
    assert numerical_rank(A) == r


@pytest.mark.parametrize(
    "name, n, expected",
    [("S2I", 4, 5), ("S1-QMS", 3, 4), ("S3", 4, 5), ("S1s", 4, 4), ("S2I", 3, 3)],
)
def test_rank_counts(name, n, expected):
    params = dict(PARAMS)
    assert expected_rank(name, n) == expected
    rep = independence_test(name, ModelContext.default(n), params, samples=5, seed=0)
    assert rep.mode == expected
    assert rep.to_dict()["pass"] is True


def test_set_membership():
    assert set_members("S2I", 3) == ["I2I", "I1s", "Cleft(3)"]
    assert commuting_members("S1-QMS", 4) == ["I1", "J1", "J1hat", "Cleft(3)"]
    with pytest.raises(ValueError):
        set_members("S9", 4)


def test_exact_brackets_frozen():
    ctx = ModelContext.default(4, exact=True)
    params = {"kappa": Fraction(1), "eta": Fraction(1), "zeta": Fraction(1)}
    assert bracket_pair("I2IIa", "I2IIb", ctx, params, mode="exact")["pass"]
    assert bracket_pair("Cleft(3)", "Cleft(4)", ctx, mode="exact")["pass"]
    # I1s is not in involution with I2IIb
    assert not bracket_pair("I1s", "I2IIb", ctx, params, mode="exact")["pass"]


def test_invariant_poly_is_exact():
    ctx = ModelContext.default(2, exact=True)
    p = invariant_poly("I1s", ctx)
    assert p.terms == {(1, 0, 0, 0): Fraction(-1), (0, 1, 0, 0): Fraction(-1, 2),
                       (0, 0, 1, 0): Fraction(1), (0, 0, 0, 1): Fraction(1, 2)}


def test_j1_j1hat_bracket_nonzero():
    # recorded in the decisions ledger: this pair does not commute
    ctx = ModelContext.default(3, exact=True)
    params = {"varkappa": Fraction(7, 10), "alpha_plus": Fraction(3, 10)}
    res = bracket_pair("J1", "J1hat", ctx, params, mode="exact")
    assert not res["pass"]
    assert bracket_pair("I1", "J1", ctx, params, mode="exact")["pass"]
    assert bracket_pair("I1", "J1hat", ctx, params, mode="exact")["pass"]


def test_involution_singular_numeric():
    res = involution_test("S2IIs", ModelContext.default(5), PARAMS, mode="numeric", samples=5)
    assert res["pass"]


@pytest.mark.parametrize("name", ["I1", "I1s", "I2I", "I2IIa", "I2IIb", "I2Is", "I2IIs", "J1", "J1hat"])
def test_named_invariants_drift_off_family(name):
    spec, _ = ELLIPTIC["dPIN"]
    tr = trajectory(start_point(), spec, ModelContext.default(N), 100, [name], PARAMS)
    assert conservation_report(tr)[name] > 1e-3

"""Determinant lemma, calM, PDE residuals, closure probe, invariant search."""

from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import subspace_angles

from h6sym.algebra import ModelContext, PhasePoint
from h6sym.classify import (
    bareiss_det,
    calM,
    closure_probe,
    expected_search_vectors,
    invariant_search,
    mn_det,
    pde_residual,
    raw_expr,
)
from h6sym.invariants import numerical_rank
from h6sym.potentials import DPIN, V1, V2I, V2II, Custom, V1s, V2Is, V2IIs

rationals = st.fractions(min_value=-5, max_value=5, max_denominator=9)


def test_mn_det_frozen():
    assert mn_det(3, -3, 1) == (Fraction(-16), Fraction(-16))
    assert mn_det(1, Fraction(2, 3), 5) == (Fraction(2, 3), Fraction(2, 3))
    with pytest.raises(ValueError):
        mn_det(0, 1, 1)


@given(st.integers(1, 10), rationals, rationals)
def test_mn_det_two_routes(n, mu, nu):
    closed, elim = mn_det(n, mu, nu)
    assert closed == elim


def test_bareiss_needs_pivoting():
    assert bareiss_det([[0, 1], [1, 0]]) == -1
    assert bareiss_det([[0, 0], [1, 0]]) == 0


@pytest.mark.parametrize("n", range(3, 9))
def test_calm_rank_special_point(n):
    assert numerical_rank(calM(np.ones(n), np.eye(n)[0]), 1e-10) == n - 2


@given(st.integers(3, 8), st.integers(0, 10_000))
def test_calm_rank_bounds(n, seed):
    rng = np.random.default_rng(seed)
    r = numerical_rank(calM(rng.normal(size=n), rng.normal(size=n)), 1e-10)
    assert n - 2 <= r <= n


def test_calm_annihilates_gradient_of_linear_potential():
    rng = np.random.default_rng(0)
    q, lam = rng.normal(size=5), rng.normal(size=5)
    assert np.max(np.abs(calM(q, lam) @ lam)) < 1e-12 * np.max(np.abs(calM(q, lam)))
    with pytest.raises(ValueError):
        calM(np.ones(3), np.ones(2))


@pytest.mark.parametrize(
    "spec",
    [
        V1(alpha_plus=0.3, varkappa=0.7),
        V2I(kappa=0.4),
        V2II(eta=0.3, zeta=0.2, kappa=0.1),
        V1s(F="sin(Y)"),
        V2Is(alpha=0.5, G="Y^3"),
        V2IIs(alpha=0.5, alpha_plus=0.3, F="Y^2"),
        DPIN(alpha=1.0),
    ],
    ids=lambda s: s.family,
)
def test_pde_residual_vanishes_on_classified(spec):
    ctx = ModelContext.default(4)
    rng = np.random.default_rng(1)
    for _ in range(5):
        rel_n, rel_l = pde_residual(spec, rng.uniform(-1, 1, 4), ctx).relative()
        assert rel_n < 1e-10 and rel_l < 1e-10


@pytest.mark.parametrize("text", ["q1 + 2*q2 + 3*q3", "q1^2 + q2^2 + q3^2"])
def test_pde_residual_vanishes_on_raw_generators(text):
    ctx = ModelContext((1.0, 2.0, 3.0))
    res = pde_residual(raw_expr(text, 3), np.array([0.3, -0.7, 1.1]), ctx)
    assert max(res.relative()) < 1e-10


def test_pde_residual_cubic_frozen():
    res = pde_residual(raw_expr("q1^3", 3), np.ones(3), ModelContext((1.0, 2.0, 3.0)))
    assert res.nonlinear == pytest.approx(9.0)
    # at N = 2 the nonlinear equation is empty for this potential
    res2 = pde_residual(raw_expr("q1^3", 2), np.ones(2), ModelContext((1.0, 2.0)))
    assert res2.nonlinear == pytest.approx(0.0)


def test_pde_residual_finite_difference_callable():
    ctx = ModelContext((1.0, 2.0, 3.0))
    res = pde_residual(lambda q: q[0] ** 3, np.ones(3), ctx)
    assert res.nonlinear == pytest.approx(9.0, rel=1e-6)


@pytest.mark.parametrize("ell, small", [("identity", True), ("scale", True), ("quadratic", False)])
def test_closure_probe(ell, small):
    rng = np.random.default_rng(2)
    sens = closure_probe(ell, rng.uniform(0.5, 1.5, 3), rng.uniform(0.5, 1.5, 3))
    assert (sens < 1e-12) if small else (sens > 1e-3)


def test_closure_probe_rejects_flat_ell():
    with pytest.raises(ValueError):
        closure_probe("X^2", np.zeros(2), np.ones(2))


def test_search_v1_degree1():
    spec = V1(alpha_plus=1.0, varkappa=1.0)
    res = invariant_search(spec, 1, ModelContext.default(4), seed=0)
    assert res.dimension == 1
    v = np.array(res.vectors[0])
    ref = expected_search_vectors("V1", spec.params(), 0.0, 1)[0]
    v, ref = v / v[-1], ref / ref[-1]
    np.testing.assert_allclose(v, ref, atol=1e-8)
    assert max(res.verification_residuals) < 1e-9


def test_search_v2ii_degree2_plane():
    spec = V2II(eta=1.0, zeta=1.0, kappa=1.0)
    ctx = ModelContext.default(4)
    M = float(sum(x * x for x in ctx.lam))
    res = invariant_search(spec, 2, ctx, seed=0)
    ref = expected_search_vectors("V2II", spec.params(), M, 2)
    found = np.array(res.vectors).T
    assert np.max(subspace_angles(ref.T, found)) < 1e-6


def test_search_v2i_contains_i1s():
    res = invariant_search(V2I(kappa=0.0), 1, ModelContext.default(4), seed=0)
    basis = np.array(res.vectors)
    target = np.array([0.0, 1.0, -1.0, 0.0, 0.0]) / np.sqrt(2)
    assert np.linalg.norm(basis.T @ (basis @ target) - target) < 1e-8


def test_search_degenerate_warning_and_sample_floor():
    res = invariant_search(Custom("0"), 1, ModelContext.default(3), seed=0)
    assert res.warnings
    with pytest.raises(ValueError):
        invariant_search(V1(alpha_plus=1.0, varkappa=1.0), 1, ModelContext.default(3), samples=5)


@given(st.floats(0.2, 3.0))
def test_search_dimension_scale_equivariant(c):
    ctx = ModelContext.default(3)
    a = invariant_search(V1(alpha_plus=0.5, varkappa=0.5), 1, ctx, seed=1)
    b = invariant_search(V1(alpha_plus=0.5 * c, varkappa=0.5 * c), 1, ctx, seed=1)
    assert a.dimension == b.dimension == 1


def test_search_dpin_sampling_in_domain():
    res = invariant_search(DPIN(alpha=1.0), 1, ModelContext.default(3), seed=0)
    assert res.dimension == 0

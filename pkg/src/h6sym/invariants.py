"""Named invariants: evaluation, conservation, functional independence, involution.

Every evaluator is plain arithmetic over the realized generators (or the
phase coordinates), so one definition yields floats, dual-number gradients
and exact polynomials in (q, p).

Parameter names: ``varkappa, alpha_plus`` (V1), ``kappa`` (V2I), ``eta,
zeta, kappa`` (V2II), ``alpha`` (V2Is), ``alpha, alpha_plus`` (V2IIs).
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import asdict, dataclass
from fractions import Fraction
from itertools import combinations
from typing import Callable, Sequence

import numpy as np

from .algebra import (
    ModelContext,
    PhasePoint,
    canonical_bracket,
    casimir,
    left_casimir,
    realize,
    right_casimir,
)
from .autodiff import Dual

# generator forms


def _I1(g, P):
    k, a = P["varkappa"], P["alpha_plus"]
    return k * g.K + a * (g.Ap + g.Am) + g.Bp + g.Bm


def _I1s(g, P):
    return g.Ap - g.Am


def _I2I(g, P):
    k = P["kappa"]
    return -(1 + k / 2) * (g.Ap * g.Ap + g.Am * g.Am) / g.M + k * g.K + g.Bp + g.Bm


def _I2IIa(g, P):
    k = P["kappa"]
    return k * (g.M * g.K - g.Ap * g.Am) - (g.Am * g.Am + g.Ap * g.Ap) + (g.Bm + g.Bp) * g.M


def _I2IIb(g, P):
    eta, zeta, k = P["eta"], P["zeta"], P["kappa"]
    return (
        (eta * g.M + k) * g.Ap * g.Am
        + zeta * g.M * (g.Ap + g.Am)
        + g.Ap * g.Ap
        + g.Am * g.Am
    )


def _I2Is(g, P):
    al = P["alpha"]
    return (
        g.Ap * g.Am
        + (g.Am * g.Am + g.Ap * g.Ap - g.Bm * g.M - g.Bp * g.M) / al
        - g.K * g.M
    )


def _I2IIs(g, P):
    al, ap = P["alpha"], P["alpha_plus"]
    return g.Ap * g.Ap + g.Am * g.Am + al * g.Ap * g.Am + ap * (g.Ap + g.Am)


def _J1(g, P):
    # a "2*varkappa*Bm" term without the factor K is not conserved; with it J1 is conserved
    a, k = P["alpha_plus"], P["varkappa"]
    K, Ap, Am, Bp, Bm, M = g.as_tuple()
    a2 = a * a
    return (
        -a2 * (a2 + k - 2) * Am * Ap
        + 2 * a * Am * Bm
        - 2 * a * (a - 1) * (a + 1) * Am * Bp
        + 2 * a * (a2 + k) * Am * K
        - 2 * a * (a - 1) * (a + 1) * Ap * Bm
        + 2 * a * Ap * Bp
        + 2 * a * (a2 + k) * Ap * K
        + Bm * Bm
        + (-k * a2 - 2 * a2 + 2) * Bp * Bm
        + 2 * k * Bm * K
        + Bp * Bp
        + 2 * k * Bp * K
        + (k * a2 + k * k + 2 * a2) * K * K
        + a2 * (a2 + k + 2) * K * M
    )


def _J1hat(g, P):
    a, k = P["alpha_plus"], P["varkappa"]
    K, Ap, Am, Bp, Bm, M = g.as_tuple()
    return (
        a * a * Ap * Am
        + 2 * a * Am * Bp
        - 2 * a * Am * K
        + 2 * a * Ap * Bm
        - 2 * a * Ap * K
        + (k + 2) * Bm * Bp
        + Bm * M
        + Bp * M
        - (k + 2) * K * K
        - (a * a + 2) * K * M
    )


def _C(g, P):
    return casimir(g)


# phase-space forms


def _dot(a, b):
    total = 0
    for x, y in zip(a, b):
        total = total + x * y
    return total


def _I1_phase(pt, ctx, P):
    # generator form; the constant is -varkappa*lambda^2/2
    k, a = P["varkappa"], P["alpha_plus"]
    total = 0
    for lam, q, p in zip(ctx.lam, pt.q, pt.p):
        total = total + p * p + q * q + a * lam * (p + q) + k * q * p - k * lam * lam / 2
    return total


def _I1s_phase(pt, ctx, P):
    total = 0
    for lam, q, p in zip(ctx.lam, pt.q, pt.p):
        total = total + lam * (p - q)
    return total


def _I2IIa_phase(pt, ctx, P):
    k = P["kappa"]
    lq, lp, l2 = _dot(ctx.lam, pt.q), _dot(ctx.lam, pt.p), _dot(ctx.lam, ctx.lam)
    qp, q2, p2 = _dot(pt.q, pt.p), _dot(pt.q, pt.q), _dot(pt.p, pt.p)
    return -k * lq * lp + k * (qp - l2 / 2) * l2 - (lq * lq + lp * lp) + (q2 + p2) * l2


def _I2IIb_phase(pt, ctx, P):
    eta, zeta, k = P["eta"], P["zeta"], P["kappa"]
    lq, lp, l2 = _dot(ctx.lam, pt.q), _dot(ctx.lam, pt.p), _dot(ctx.lam, ctx.lam)
    return (eta * l2 + k) * lq * lp + zeta * l2 * (lp + lq) + lp * lp + lq * lq


@dataclass(frozen=True)
class InvariantDef:
    name: str
    params: tuple[str, ...]
    generator_form: Callable | None
    phase_form: Callable | None = None


REGISTRY: dict[str, InvariantDef] = {
    d.name: d
    for d in (
        InvariantDef("I1", ("varkappa", "alpha_plus"), _I1, _I1_phase),
        InvariantDef("I1s", (), _I1s, _I1s_phase),
        InvariantDef("I2I", ("kappa",), _I2I),
        InvariantDef("I2IIa", ("kappa",), _I2IIa, _I2IIa_phase),
        InvariantDef("I2IIb", ("eta", "zeta", "kappa"), _I2IIb, _I2IIb_phase),
        InvariantDef("I2Is", ("alpha",), _I2Is),
        InvariantDef("I2IIs", ("alpha", "alpha_plus"), _I2IIs),
        InvariantDef("J1", ("alpha_plus", "varkappa"), _J1),
        InvariantDef("J1hat", ("alpha_plus", "varkappa"), _J1hat),
        InvariantDef("C", (), _C),
    )
}

FAMILY_INVARIANTS = {
    "V1": ("I1", "J1", "J1hat"),
    "V2I": ("I2I", "I1s"),
    "V2II": ("I2IIa", "I2IIb"),
    "V1s": ("I1s",),
    "V2Is": ("I2Is",),
    "V2IIs": ("I2IIs",),
    "dPIN": (),
    "Custom": (),
}

_CASIMIR_ID = re.compile(r"^(Cleft|Cright)\((\d+)\)$")


def parse_id(inv_id: str):
    """Return ``(name, m)``; ``m`` is None except for Cleft/Cright."""
    m = _CASIMIR_ID.match(inv_id)
    if m:
        return m.group(1), int(m.group(2))
    if inv_id not in REGISTRY:
        raise ValueError(f"unknown invariant id {inv_id!r}")
    return inv_id, None


def casimir_ids(n: int) -> list[str]:
    """C, Cleft(3..N), Cright(3..N-1)."""
    return ["C"] + [f"Cleft({m})" for m in range(3, n + 1)] + [f"Cright({m})" for m in range(3, n)]


def registered_ids(family: str, n: int) -> list[str]:
    return casimir_ids(n) + list(FAMILY_INVARIANTS.get(family, ()))


def _resolve_params(d: InvariantDef, params: dict) -> dict:
    missing = [p for p in d.params if p not in params]
    if missing:
        raise ValueError(f"invariant {d.name} needs parameter(s) {missing}")
    return {p: params[p] for p in d.params}


def eval_invariant(inv_id: str, point: PhasePoint, ctx: ModelContext, params: dict | None = None, route: str = "auto"):
    """Evaluate an invariant; ``route`` is 'auto', 'phase' or 'generator'."""
    name, m = parse_id(inv_id)
    if name == "Cleft":
        return left_casimir(m, point, ctx)
    if name == "Cright":
        return right_casimir(m, point, ctx)
    d = REGISTRY[name]
    P = _resolve_params(d, params or {})
    if route == "phase" or (route == "auto" and d.phase_form is not None):
        if d.phase_form is None:
            raise ValueError(f"{name} has no separate phase-space form")
        return d.phase_form(point, ctx, P)
    return d.generator_form(realize(point, ctx), P)


def exact_params(params: dict) -> dict:
    """Convert numeric parameters to exact rationals (floats convert exactly)."""
    return {k: Fraction(v) if isinstance(v, (int, float, Fraction)) else v for k, v in params.items()}


def invariant_poly(inv_id: str, ctx: ModelContext, params: dict | None = None):
    """Exact polynomial in (q1..qN, p1..pN); lambda and params must be rational."""
    ctx = ModelContext(tuple(Fraction(x) for x in ctx.lam), ctx.h)
    return eval_invariant(inv_id, PhasePoint.symbolic(ctx.n), ctx, exact_params(params or {}))


# conservation


def conservation_report(traj, ids: Sequence[str] | None = None) -> dict[str, float]:
    """Max over steps of |I(t) - I(0)| / max(1, running max |I|)."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    ids = list(traj.values) if ids is None else list(ids)
    out = {}
    for inv in ids:
        col = traj.column(inv)
        running = np.maximum.accumulate(np.abs(col))
        drift = np.abs(col - col[0]) / np.maximum(1.0, running)
        out[inv] = float(np.max(drift))
    return out


# Jacobians and rank


def _dual_point(x: np.ndarray) -> PhasePoint:
    seeds = Dual.seed(x)
    n = len(x) // 2
    return PhasePoint(tuple(seeds[:n]), tuple(seeds[n:]))


def gradient(inv_id: str, point: PhasePoint, ctx: ModelContext, params: dict | None = None) -> np.ndarray:
    x = point.as_array()
    val = eval_invariant(inv_id, _dual_point(x), ctx.as_floats(), params)
    if isinstance(val, Dual):
        return val.grad.copy()
    return np.zeros_like(x)


def jacobian_rows(ids: Sequence[str], point: PhasePoint, ctx: ModelContext, params: dict | None = None) -> np.ndarray:
    """Rows are exact (dual-number) gradients in (q, p)."""
    return np.vstack([gradient(i, point, ctx, params) for i in ids])


def numerical_rank(matrix, tol: float = 1e-8) -> int:
    """Count of singular values above ``tol`` times the largest one."""
    a = np.atleast_2d(np.asarray(matrix, dtype=float))
    if a.size == 0:
        raise ValueError("numerical_rank of an empty matrix")
    if not tol > 0:
        raise ValueError("tol must be positive")
    s = np.linalg.svd(a, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > tol * s[0]))


# named sets

SET_FAMILY = {
    "S1-QMS": "V1",
    "S2I": "V2I",
    "S3": "V2II",
    "S1s": "V1s",
    "S2Is": "V2Is",
    "S2IIs": "V2IIs",
}

_SET_HEAD = {
    "S1-QMS": ("I1", "J1", "J1hat"),
    "S2I": ("I2I", "I1s"),
    "S3": ("I2IIa", "I2IIb"),
    "S1s": ("I1s",),
    "S2Is": ("I2Is",),
    "S2IIs": ("I2IIs",),
}

_EXPECTED_OFFSET = {"S1-QMS": 2, "S2I": 3, "S3": 3, "S1s": 4, "S2Is": 4, "S2IIs": 4}


def _check_set(name: str):
    if name not in _SET_HEAD:
        raise ValueError(f"unknown invariant set {name!r}; expected one of {sorted(_SET_HEAD)}")


def set_members(name: str, n: int) -> list[str]:
    """Named invariants followed by Cleft(3..N) and Cright(3..N-1)."""
    _check_set(name)
    return (
        list(_SET_HEAD[name])
        + [f"Cleft({m})" for m in range(3, n + 1)]
        + [f"Cright({m})" for m in range(3, n)]
    )


def expected_rank(name: str, n: int) -> int:
    _check_set(name)
    return 2 * n - _EXPECTED_OFFSET[name]


def commuting_members(name: str, n: int) -> list[str]:
    """The subset claimed to be in involution: the named ones plus Cleft(3..N).

    For S1-QMS this is the first N entries of the set, which include both
    J1 and J1hat.
    """
    _check_set(name)
    if name == "S1-QMS":
        return list(_SET_HEAD[name]) + [f"Cleft({m})" for m in range(3, n)]
    return list(_SET_HEAD[name]) + [f"Cleft({m})" for m in range(3, n + 1)]


def sample_points(n: int, samples: int, seed: int) -> list[PhasePoint]:
    rng = np.random.default_rng(seed)
    return [PhasePoint.from_array(rng.uniform(-1.0, 1.0, 2 * n)) for _ in range(samples)]


@dataclass
class IndependenceReport:
    set: str
    N: int
    lam: list
    params: dict
    samples: int
    ranks: list
    expected_rank: int
    mode: int
    min: int
    max: int
    tol: float
    passed: bool

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        d["pass"] = d.pop("passed")
        return d


def independence_test(
    set_name: str,
    ctx: ModelContext,
    params: dict | None = None,
    samples: int = 5,
    seed: int = 0,
    tol: float = 1e-8,
) -> IndependenceReport:
    n = ctx.n
    if n < 3:
        raise ValueError("independence tests need N >= 3")
    ids = set_members(set_name, n)
    ranks = []
    for pt in sample_points(n, samples, seed):
        ranks.append(numerical_rank(jacobian_rows(ids, pt, ctx, params), tol))
    mode = Counter(ranks).most_common(1)[0][0]
    expect = expected_rank(set_name, n)
    return IndependenceReport(
        set=set_name,
        N=n,
        lam=[float(x) for x in ctx.lam],
        params={k: float(v) for k, v in (params or {}).items()},
        samples=samples,
        ranks=ranks,
        expected_rank=expect,
        mode=mode,
        min=min(ranks),
        max=max(ranks),
        tol=tol,
        passed=mode == expect,
    )


# involution


def numeric_bracket(f_id: str, g_id: str, point: PhasePoint, ctx: ModelContext, params: dict | None = None):
    """Canonical bracket at a point and the scale |grad f| |grad g|."""
    n = ctx.n
    df = gradient(f_id, point, ctx, params)
    dg = gradient(g_id, point, ctx, params)
    value = float(df[:n] @ dg[n:] - df[n:] @ dg[:n])
    return value, float(np.linalg.norm(df) * np.linalg.norm(dg))


def exact_bracket(f_id: str, g_id: str, ctx: ModelContext, params: dict | None = None):
    return canonical_bracket(invariant_poly(f_id, ctx, params), invariant_poly(g_id, ctx, params))


def bracket_pair(
    f_id: str,
    g_id: str,
    ctx: ModelContext,
    params: dict | None = None,
    mode: str = "numeric",
    samples: int = 10,
    seed: int = 0,
    tol: float = 1e-9,
) -> dict:
    if mode == "exact":
        br = exact_bracket(f_id, g_id, ctx, params)
        return {"pair": [f_id, g_id], "mode": "exact", "nonzero_terms": len(br), "pass": br.is_zero()}
    worst = 0.0
    for pt in sample_points(ctx.n, samples, seed):
        value, scale = numeric_bracket(f_id, g_id, pt, ctx, params)
        worst = max(worst, abs(value) / max(1.0, scale))
    return {"pair": [f_id, g_id], "mode": "numeric", "max_relative": worst, "pass": worst < tol}


def involution_test(
    set_name: str,
    ctx: ModelContext,
    params: dict | None = None,
    mode: str = "auto",
    samples: int = 10,
    seed: int = 0,
) -> dict:
    """Pairwise brackets among the set's commuting subset.

    ``auto`` uses exact polynomials for N <= 4 and numeric brackets above.
    """
    if mode not in ("auto", "exact", "numeric"):
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "auto":
        mode = "exact" if ctx.n <= 4 else "numeric"
    members = commuting_members(set_name, ctx.n)
    rows = [
        bracket_pair(f, g, ctx, params, mode=mode, samples=samples, seed=seed)
        for f, g in combinations(members, 2)
    ]
    return {
        "set": set_name,
        "N": ctx.n,
        "lambda": [float(x) for x in ctx.lam],
        "params": {k: float(v) for k, v in (params or {}).items()},
        "members": members,
        "brackets": rows,
        "pass": all(r["pass"] for r in rows),
    }

"""Continuum limits: coefficient scalings, limiting ODEs, a fourth-order
reference integrator, convergence orders and invariant expansions in h.

Discrete and continuous states are matched by q = Q(t), p = Q(t - h); for
expansions p is the second-order Taylor value Q - h*P + (h^2/2)*Qddot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .algebra import ModelContext, PhasePoint, left_casimir, right_casimir
from .autodiff import Dual
from .dynamics import DivergenceError, trajectory
from .expr import ExprTree, parse_expr
from .invariants import eval_invariant
from .potentials import V1, V1s, V2I, V2II, V2Is, V2IIs, PotentialSpec

SCALED_FAMILIES = ("V1", "V2I", "V2II", "V1s", "V2Is", "V2IIs")


@dataclass(frozen=True)
class ScalingRule:
    """Physical parameters of a continuum limit and the map h -> family parameters."""

    family: str
    omega: float = 1.0
    gamma: float = 0.0
    delta: float = 0.0
    f: ExprTree | str | None = None
    g: ExprTree | str | None = None

    def __post_init__(self):
        if self.family not in SCALED_FAMILIES:
            raise ValueError(f"no continuum scaling for family {self.family!r}")
        for name in ("f", "g"):
            value = getattr(self, name)
            if isinstance(value, str):
                object.__setattr__(self, name, parse_expr(value))
        if self.family in ("V1s", "V2IIs") and self.f is None:
            raise ValueError(f"{self.family} needs an expression f(X, Y)")
        if self.family == "V2Is" and self.g is None:
            raise ValueError("V2Is needs an expression g(X, Y)")

    def params(self, h) -> dict:
        """Discrete parameters at step h (exact if h and the rule are rational)."""
        w2h2 = self.omega * self.omega * h * h
        fam = self.family
        if fam == "V1":
            return {"varkappa": w2h2 - 2, "alpha_plus": self.gamma * h * h}
        if fam == "V2I":
            return {"kappa": w2h2 - 2}
        if fam == "V2II":
            return {"kappa": w2h2 - 2, "zeta": self.gamma * h * h, "eta": self.delta * h * h}
        if fam == "V1s":
            return {}
        if fam == "V2Is":
            return {"alpha": w2h2 - 2}
        return {"alpha": w2h2 - 2, "alpha_plus": self.gamma * h * h}

    def to_dict(self) -> dict:
        out = {"family": self.family, "omega": self.omega, "gamma": self.gamma, "delta": self.delta}
        if self.f is not None:
            out["f"] = self.f.unparse()
        if self.g is not None:
            out["g"] = self.g.unparse()
        return out


def scaled_spec(rule: ScalingRule, h: float) -> PotentialSpec:
    if not h > 0:
        raise ValueError("h must be positive")
    P = {k: float(v) for k, v in rule.params(h).items()}
    fam = rule.family
    if fam == "V1":
        return V1(alpha_plus=P["alpha_plus"], varkappa=P["varkappa"])
    if fam == "V2I":
        return V2I(kappa=P["kappa"])
    if fam == "V2II":
        return V2II(eta=P["eta"], zeta=P["zeta"], kappa=P["kappa"])
    if fam == "V1s":
        return V1s(F=rule.f, scale=h * h)
    if fam == "V2Is":
        return V2Is(alpha=P["alpha"], G=rule.g, scale=h * h)
    return V2IIs(alpha=P["alpha"], alpha_plus=P["alpha_plus"], F=rule.f, scale=h * h)


# limiting ODEs


def _partial_y(expr: ExprTree, x: float, y: float) -> float:
    out = expr(*Dual.seed([x, y]))
    return float(out.grad[1]) if isinstance(out, Dual) else 0.0


@dataclass(frozen=True)
class OdeSystem:
    """Qddot = accel(Q) for one family; written out per family, not derived from the map."""

    rule: ScalingRule
    lam: tuple

    @property
    def lam_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.lam])

    def accel(self, Q) -> np.ndarray:
        Q = np.asarray(Q, dtype=float)
        lam = self.lam_array
        r = self.rule
        w2 = r.omega * r.omega
        M = float(lam @ lam)
        lq = float(lam @ Q)
        fam = r.family
        if fam == "V1":
            return -w2 * Q - r.gamma * lam
        if fam == "V2I":
            return -w2 * Q + w2 * lq / M * lam
        if fam == "V2II":
            return -w2 * Q - (r.gamma + r.delta * lq) * lam
        if fam == "V1s":
            fy = _partial_y(r.f, M, M * float(Q @ Q) - lq * lq)
            return fy * (2 * M * Q - 2 * lq * lam)
        if fam == "V2Is":
            return -w2 * Q + _partial_y(r.g, M, lq) * lam
        fy = _partial_y(r.f, M, M * float(Q @ Q) - lq * lq)
        return -w2 * Q - (r.gamma / M) * lam + fy * (2 * M * Q - 2 * lq * lam)

    def rhs(self, y: np.ndarray) -> np.ndarray:
        n = y.size // 2
        return np.concatenate([y[n:], self.accel(y[:n])])


@dataclass
class ContinuousSamples:
    times: np.ndarray
    Q: np.ndarray
    P: np.ndarray


def _rk4(sys: OdeSystem, y: np.ndarray, dt: float, nsteps: int) -> np.ndarray:
    for _ in range(nsteps):
        k1 = sys.rhs(y)
        k2 = sys.rhs(y + 0.5 * dt * k1)
        k3 = sys.rhs(y + 0.5 * dt * k2)
        k4 = sys.rhs(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y)):
        raise DivergenceError(-1, "non-finite state in the reference solution")
    return y


def default_substeps(h: float) -> int:
    # inner step <= h^2
    return max(1, math.ceil(1.0 / h))


def reference_solve(sys: OdeSystem, Q0, P0, T: float, h: float, substeps: int | None = None) -> ContinuousSamples:
    """Classical RK4; samples at t = 0, h, 2h, ... up to T (rounded to whole steps)."""
    substeps = default_substeps(h) if substeps is None else substeps
    if substeps < 1:
        raise ValueError("substeps must be >= 1")
    n_out = int(round(T / h))
    y = np.concatenate([np.asarray(Q0, dtype=float), np.asarray(P0, dtype=float)])
    n = y.size // 2
    ys = [y]
    for _ in range(n_out):
        y = _rk4(sys, y, h / substeps, substeps)
        ys.append(y)
    ys = np.array(ys)
    return ContinuousSamples(h * np.arange(n_out + 1), ys[:, :n], ys[:, n:])


def backward_position(sys: OdeSystem, Q0, P0, h: float, substeps: int | None = None) -> np.ndarray:
    """Q(-h) from one reference step backwards in time."""
    substeps = default_substeps(h) if substeps is None else substeps
    y = np.concatenate([np.asarray(Q0, dtype=float), np.asarray(P0, dtype=float)])
    y = _rk4(sys, y, -h / substeps, substeps)
    return y[: y.size // 2]


def loglog_slope(hs: Sequence[float], values: Sequence[float]) -> float:
    x = np.log(np.asarray(hs, dtype=float))
    y = np.log(np.asarray(values, dtype=float))
    return float(np.polyfit(x, y, 1)[0])


@dataclass
class ConvergenceResult:
    family: str
    h: list
    max_err: list
    slope: float

    def to_dict(self) -> dict:
        return {"family": self.family, "h": self.h, "max_err": self.max_err, "slope": self.slope}


def convergence_order(rule: ScalingRule, lam, Q0, P0, T: float, h_list: Sequence[float]) -> ConvergenceResult:
    """Slope of max position error (discrete map vs reference ODE) against h."""
    h_list = [float(h) for h in h_list]
    if len(h_list) < 4:
        raise ValueError("need at least 4 step sizes")
    sys = OdeSystem(rule, tuple(lam))
    ctx = ModelContext(tuple(float(x) for x in lam))
    errs = []
    for h in h_list:
        ref = reference_solve(sys, Q0, P0, T, h)
        p0 = backward_position(sys, Q0, P0, h)
        steps = len(ref.times) - 1
        tr = trajectory(PhasePoint(tuple(map(float, Q0)), tuple(p0.tolist())), scaled_spec(rule, h), ctx, steps)
        q = np.array([pt.q for pt in tr.points])
        errs.append(float(np.max(np.abs(q - ref.Q))))
    return ConvergenceResult(rule.family, h_list, errs, loglog_slope(h_list, errs))


# Hamiltonians


def hamiltonian_eval(rule: ScalingRule, lam, Q, P) -> float:
    """Hamiltonian of the limiting Lagrangian of each family."""
    Q = np.asarray(Q, dtype=float)
    P = np.asarray(P, dtype=float)
    lam = np.array([float(x) for x in lam])
    w2 = rule.omega**2
    M = float(lam @ lam)
    lq = float(lam @ Q)
    kin = 0.5 * float(P @ P)
    osc = 0.5 * w2 * float(Q @ Q)
    fam = rule.family
    if fam == "V1":
        return kin + osc + rule.gamma * lq
    if fam == "V2I":
        return kin + osc - w2 / (2 * M) * lq * lq
    if fam == "V2II":
        return kin + osc + rule.gamma * lq + 0.5 * rule.delta * lq * lq
    Y = M * float(Q @ Q) - lq * lq
    if fam == "V1s":
        return kin - float(rule.f(M, Y))
    if fam == "V2Is":
        return kin + osc - float(rule.g(M, lq))
    return kin + osc + rule.gamma / M * lq - float(rule.f(M, Y))


def si_form_hamiltonian(Q, P, lam, delta1, calF=None, calG=None):
    """H = P^2/2 + delta1*Q^2 + calF(lam^2, sum_{i<j}(lam_j Q_i - lam_i Q_j)^2) + calG(lam^2, lam.Q).

    Generic over floats and dual numbers; calF, calG are callables of (X, Y).
    """
    n = len(Q)
    M = sum(float(x) ** 2 for x in lam)
    H = 0.5 * sum(p * p for p in P) + delta1 * sum(q * q for q in Q)
    if calF is not None:
        S = 0
        for i in range(n):
            for j in range(i + 1, n):
                d = lam[j] * Q[i] - lam[i] * Q[j]
                S = S + d * d
        H = H + calF(M, S)
    if calG is not None:
        lq = 0
        for l, q in zip(lam, Q):
            lq = lq + l * q
        H = H + calG(M, lq)
    return H


def si_form_dictionary(rule: ScalingRule):
    """(delta1, calF, calG) identifying each singular family with the superintegrable form."""
    w2 = rule.omega**2
    if rule.family == "V1s":
        return 0.0, (lambda X, Y: -rule.f(X, Y)), None
    if rule.family == "V2Is":
        return w2 / 2, None, (lambda X, Y: -rule.g(X, Y))
    if rule.family == "V2IIs":
        return w2 / 2, (lambda X, Y: -rule.f(X, Y)), (lambda X, Y: rule.gamma * Y / X)
    raise ValueError(f"{rule.family} is not a singular family")


def si_form_residual(rule: ScalingRule, lam, Q) -> float:
    """max |(-dH/dQ of the superintegrable-form Hamiltonian) - accel(Q)|."""
    delta1, calF, calG = si_form_dictionary(rule)
    lam = tuple(float(x) for x in lam)
    Qd = Dual.seed(np.asarray(Q, dtype=float))
    H = si_form_hamiltonian(Qd, [0.0] * len(Qd), lam, delta1, calF, calG)
    force = -H.grad
    return float(np.max(np.abs(force - OdeSystem(rule, lam).accel(Q))))


# expansions


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


def _exact_accel(rule: ScalingRule, lam, Q):
    """Qddot for the polynomial families, in exact arithmetic."""
    w2 = _frac(rule.omega) ** 2
    g, d = _frac(rule.gamma), _frac(rule.delta)
    M = sum(l * l for l in lam)
    lq = sum(l * q for l, q in zip(lam, Q))
    fam = rule.family
    if fam == "V1":
        return [-w2 * q - g * l for q, l in zip(Q, lam)]
    if fam == "V2I":
        return [-w2 * q + w2 * lq / M * l for q, l in zip(Q, lam)]
    if fam == "V2II":
        return [-w2 * q - (g + d * lq) * l for q, l in zip(Q, lam)]
    raise ValueError(f"exact expansions are implemented for V1, V2I, V2II; got {fam}")


def discrete_point(rule: ScalingRule, lam, Q, P, h) -> PhasePoint:
    """q = Q, p = Q - h*P + (h^2/2)*Qddot, exact."""
    lam = [_frac(x) for x in lam]
    Q = [_frac(x) for x in Q]
    P = [_frac(x) for x in P]
    h = _frac(h)
    a = _exact_accel(rule, lam, Q)
    p = [q - h * pp + h * h / 2 * aa for q, pp, aa in zip(Q, P, a)]
    return PhasePoint(tuple(Q), tuple(p))


def _dot(a, b):
    return sum((x * y for x, y in zip(a, b)), Fraction(0))


def _H_exact(rule, lam, Q, P):
    w2 = _frac(rule.omega) ** 2
    g, d = _frac(rule.gamma), _frac(rule.delta)
    M, lq = _dot(lam, lam), _dot(lam, Q)
    base = _dot(P, P) / 2 + w2 * _dot(Q, Q) / 2
    if rule.family == "V1":
        return base + g * lq
    if rule.family == "V2I":
        return base - w2 / (2 * M) * lq * lq
    return base + g * lq + d * lq * lq / 2


def _I2IIa_2(rule, lam, Q, P):
    w2 = _frac(rule.omega) ** 2
    M, lq, lp = _dot(lam, lam), _dot(lam, Q), _dot(lam, P)
    return M * (_dot(P, P) + w2 * _dot(Q, Q) - w2 * M / 2) - w2 * lq * lq - lp * lp


def _I2IIb_2(rule, lam, Q, P):
    w2 = _frac(rule.omega) ** 2
    g, d = _frac(rule.gamma), _frac(rule.delta)
    M, lq, lp = _dot(lam, lam), _dot(lam, Q), _dot(lam, P)
    return lp * lp + w2 * lq * lq + M * (d * lq * lq + 2 * g * lq)


@dataclass(frozen=True)
class Expansion:
    """I(h) = lead + h^power * limit + higher order."""

    invariant: str
    family: str
    power: int
    lead: object  # callable(rule, lam, Q, P)
    limit: object
    source: str


def _M(rule, lam, Q, P):
    return _dot(lam, lam)


def _C_limit(name, m=None):
    def limit(rule, lam, Q, P):
        ctx = ModelContext(tuple(lam))
        pt = PhasePoint(tuple(Q), tuple(P))
        if name == "Cleft":
            return left_casimir(m, pt, ctx)
        return right_casimir(m, pt, ctx)

    return limit


EXPANSIONS: dict[tuple[str, str], Expansion] = {}


def _register(e: Expansion):
    EXPANSIONS[(e.invariant, e.family)] = e


_register(Expansion("I1", "V1", 2, _M,
                    lambda r, l, Q, P: 2 * _H_exact(r, l, Q, P) - _frac(r.omega) ** 2 * _M(r, l, Q, P) / 2,
                    "stated"))
_register(Expansion("J1hat", "V1", 2, lambda r, l, Q, P: _M(r, l, Q, P) ** 2,
                    lambda r, l, Q, P: _M(r, l, Q, P) * (2 * _H_exact(r, l, Q, P) - _frac(r.omega) ** 2 * _M(r, l, Q, P) / 4),
                    "stated"))
# stated form for J1: lambda^4 + lambda^2*H1 at order h^2
_register(Expansion("J1", "V1", 2, lambda r, l, Q, P: _M(r, l, Q, P) ** 2,
                    lambda r, l, Q, P: _M(r, l, Q, P) * _H_exact(r, l, Q, P),
                    "stated"))
_register(Expansion("J1:derived", "V1", 2, lambda r, l, Q, P: _M(r, l, Q, P) ** 2,
                    lambda r, l, Q, P: _M(r, l, Q, P) * (4 * _H_exact(r, l, Q, P) - _frac(r.omega) ** 2 * _M(r, l, Q, P)),
                    "derived"))
_register(Expansion("I2I", "V2I", 2, _M,
                    lambda r, l, Q, P: 2 * _H_exact(r, l, Q, P) - _frac(r.omega) ** 2 * _M(r, l, Q, P) / 2,
                    "stated, with H2I carrying 1/2 on the (lambda.Q)^2 term"))
_register(Expansion("I1s", "V2I", 1, lambda r, l, Q, P: Fraction(0),
                    lambda r, l, Q, P: -_dot(l, P), "stated"))
_register(Expansion("I2IIa", "V2II", 2, lambda r, l, Q, P: _M(r, l, Q, P) ** 2, _I2IIa_2, "stated"))
_register(Expansion("I2IIb", "V2II", 2, lambda r, l, Q, P: Fraction(0), _I2IIb_2, "stated"))
for _fam in ("V1", "V2I", "V2II"):
    _register(Expansion("Cleft(3)", _fam, 2, lambda r, l, Q, P: Fraction(0), _C_limit("Cleft", 3), "stated"))
    _register(Expansion("Cright(3)", _fam, 2, lambda r, l, Q, P: Fraction(0), _C_limit("Cright", 3), "stated"))


@dataclass
class ExpansionResult:
    invariant: str
    family: str
    lead_expected: str
    lead_computed: str
    lead_exact: bool
    h: list
    residual: list
    slope: float
    source: str

    @property
    def passed(self) -> bool:
        return self.lead_exact and self.slope >= 0.9

    def to_dict(self) -> dict:
        return {
            "invariant": self.invariant,
            "family": self.family,
            "lead_expected": self.lead_expected,
            "lead_computed": self.lead_computed,
            "lead_exact": self.lead_exact,
            "h": self.h,
            "residual": self.residual,
            "slope": self.slope if math.isfinite(self.slope) else "inf",
            "source": self.source,
            "pass": self.passed,
        }


def _eval_exact(inv_id: str, rule: ScalingRule, lam, Q, P, h) -> Fraction:
    base = inv_id.split(":")[0]
    pt = discrete_point(rule, lam, Q, P, h)
    ctx = ModelContext(tuple(_frac(x) for x in lam))
    params = {k: _frac(v) for k, v in rule.params(_frac(h)).items()}
    return eval_invariant(base, pt, ctx, params)


def expansion_check(inv_id: str, rule: ScalingRule, lam, Q, P, h_list: Sequence[float]) -> ExpansionResult:
    """Exact leading constant at h = 0 and the order of the correction residual.

    residual(h) = |(I(h) - lead)/h^power - limit|, computed in exact rationals.
    """
    key = (inv_id, rule.family)
    if key not in EXPANSIONS:
        raise ValueError(f"no registered expansion for {inv_id} on {rule.family}")
    e = EXPANSIONS[key]
    lam_f = [_frac(x) for x in lam]
    Q_f = [_frac(x) for x in Q]
    P_f = [_frac(x) for x in P]
    exact_rule = ScalingRule(rule.family, _frac(rule.omega), _frac(rule.gamma), _frac(rule.delta), rule.f, rule.g)
    lead = _frac(e.lead(exact_rule, lam_f, Q_f, P_f))
    limit = _frac(e.limit(exact_rule, lam_f, Q_f, P_f))
    at_zero = _eval_exact(inv_id, exact_rule, lam_f, Q_f, P_f, Fraction(0))
    residuals = []
    for h in h_list:
        hf = _frac(h)
        val = _eval_exact(inv_id, exact_rule, lam_f, Q_f, P_f, hf)
        residuals.append(float(abs((val - lead) / hf**e.power - limit)))
    # an identically zero residual means the expansion is exact
    slope = float("inf") if max(residuals) == 0 else loglog_slope(h_list, [max(r, 1e-300) for r in residuals])
    return ExpansionResult(
        invariant=inv_id,
        family=rule.family,
        lead_expected=str(lead),
        lead_computed=str(at_zero),
        lead_exact=at_zero == lead,
        h=[float(h) for h in h_list],
        residual=residuals,
        slope=slope,
        source=e.source,
    )


def i2ii_identity_gap(rule: ScalingRule, lam, Q, P) -> float:
    """|I2IIa^(2) + I2IIb^(2) - lambda^2 (2 H2II - omega^2 lambda^2 / 2)| in floats."""
    lam_f = [_frac(x) for x in lam]
    Q_f = [_frac(x) for x in Q]
    P_f = [_frac(x) for x in P]
    lhs = float(_I2IIa_2(rule, lam_f, Q_f, P_f) + _I2IIb_2(rule, lam_f, Q_f, P_f))
    M = float(_dot(lam_f, lam_f))
    H = hamiltonian_eval(rule, lam, Q, P)
    rhs = M * (2 * H - rule.omega**2 * M / 2)
    return abs(lhs - rhs)

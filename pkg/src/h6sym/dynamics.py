"""The explicit symplectic map in (q, p) and its closed image on the generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .algebra import GENERATORS, GeneratorState, ModelContext, NonFiniteStateError, PhasePoint, realize
from .potentials import PotentialSpec, eval_potential

DIVERGENCE_BOUND = 1e12


class DivergenceError(RuntimeError):
    def __init__(self, step: int, reason: str):
        super().__init__(f"trajectory diverged at step {step}: {reason}")
        self.step = step
        self.reason = reason


def _lam(ctx: ModelContext) -> np.ndarray:
    return np.array([float(x) for x in ctx.lam])


def step_phase(point: PhasePoint, spec: PotentialSpec, ctx: ModelContext) -> PhasePoint:
    """q' = V_A*lambda + 2*V_B*q - p,  p' = q."""
    gen = realize(point, ctx)
    _, va, vb = eval_potential(spec, float(gen.Am), float(gen.Bm), float(gen.M))
    q = np.array([float(x) for x in point.q])
    p = np.array([float(x) for x in point.p])
    q_new = va * _lam(ctx) + 2.0 * vb * q - p
    return PhasePoint(tuple(q_new.tolist()), tuple(q.tolist()))


def step_phase_with_gradient(point: PhasePoint, grad_fn: Callable[[np.ndarray], np.ndarray]) -> PhasePoint:
    """Standard-form map for a raw potential given only through its q-gradient."""
    q = np.array([float(x) for x in point.q])
    p = np.array([float(x) for x in point.p])
    q_new = np.asarray(grad_fn(q), dtype=float) - p
    return PhasePoint(tuple(q_new.tolist()), tuple(q.tolist()))


def step_generators(gen: GeneratorState, spec: PotentialSpec) -> GeneratorState:
    """The induced map on (K, Ap, Am, Bp, Bm, M)."""
    K, Ap, Am, Bp, Bm, M = (float(x) for x in gen.as_tuple())
    _, va, vb = eval_potential(spec, Am, Bm, M)
    return GeneratorState(
        K=-K + Am * va + 2 * Bm * vb - M,
        Ap=Am,
        Am=M * va + 2 * Am * vb - Ap,
        Bp=Bm,
        # the q.p cross term of q'^2 enters through K + M/2
        Bm=(
            M * va * va
            + 4 * Am * va * vb
            - 4 * (K + M / 2) * vb
            + 4 * Bm * vb * vb
            - 2 * Ap * va
            + Bp
        ),
        M=M,
    )


def closure_check(point: PhasePoint, spec: PotentialSpec, ctx: ModelContext) -> float:
    """Max-norm gap between realize(step_phase(x)) and step_generators(realize(x))."""
    a = realize(step_phase(point, spec, ctx), ctx).as_array()
    b = step_generators(realize(point, ctx), spec).as_array()
    return float(np.max(np.abs(a - b)))


def closure_scale(point: PhasePoint, spec: PotentialSpec, ctx: ModelContext) -> float:
    """Magnitude used to turn the closure gap into a relative number."""
    a = realize(step_phase(point, spec, ctx), ctx).as_array()
    return max(1.0, float(np.max(np.abs(a))))


def lambda_reflection(ctx: ModelContext, rng: np.random.Generator) -> np.ndarray:
    """A Householder reflection fixing lambda; it preserves every realized generator."""
    lam = _lam(ctx)
    u = rng.normal(size=lam.size)
    u -= (u @ lam) / (lam @ lam) * lam
    u /= np.linalg.norm(u)
    return np.eye(lam.size) - 2.0 * np.outer(u, u)


def raw_closure_gap(point: PhasePoint, grad_fn, ctx: ModelContext, seed: int = 0) -> float:
    """Evidence against closure for a potential not of the form V(Am, Bm, M).

    Two points with equal generator values are stepped with the raw
    gradient; if the map closed on the generators their images would agree.
    """
    if ctx.n < 2:
        raise ValueError("need N >= 2 for a non-trivial lambda-fixing reflection")
    R = lambda_reflection(ctx, np.random.default_rng(seed))
    x = point.as_array()
    n = ctx.n
    other = PhasePoint.from_array(np.concatenate([R @ x[:n], R @ x[n:]]))
    a = realize(step_phase_with_gradient(point, grad_fn), ctx).as_array()
    b = realize(step_phase_with_gradient(other, grad_fn), ctx).as_array()
    return float(np.max(np.abs(a - b)))


def swap(point: PhasePoint) -> PhasePoint:
    return PhasePoint(point.p, point.q)


def symplectic_defect(point: PhasePoint, spec: PotentialSpec, ctx: ModelContext, eps: float = 1e-6) -> float:
    """max |J^T Omega J - Omega| for the finite-difference Jacobian J."""
    x0 = point.as_array()
    n2 = x0.size
    n = n2 // 2
    J = np.empty((n2, n2))
    for j in range(n2):
        e = np.zeros(n2)
        e[j] = eps
        fp = step_phase(PhasePoint.from_array(x0 + e), spec, ctx).as_array()
        fm = step_phase(PhasePoint.from_array(x0 - e), spec, ctx).as_array()
        J[:, j] = (fp - fm) / (2 * eps)
    omega = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    return float(np.max(np.abs(J.T @ omega @ J - omega)))


@dataclass
class Trajectory:
    """Orbit samples; entry t is the state after t applications of the map."""

    ctx: ModelContext
    points: list = field(default_factory=list)
    generators: list = field(default_factory=list)
    values: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.points)

    @property
    def steps(self) -> list[int]:
        return list(range(len(self.points)))

    def column(self, inv_id: str) -> np.ndarray:
        return np.asarray(self.values[inv_id], dtype=float)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            write_trajectory_csv(self, fh)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, fh) -> None:
    n = traj.ctx.n
    ids = list(traj.values)
    header = (
        ["step"]
        + [f"q{i}" for i in range(1, n + 1)]
        + [f"p{i}" for i in range(1, n + 1)]
        + list(GENERATORS)
        + ids
    )
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(header)
    for t, (pt, gen) in enumerate(zip(traj.points, traj.generators)):
        row = [str(t)] + [_fmt(x) for x in pt.q + pt.p] + [_fmt(x) for x in gen.as_tuple()]
        row += [_fmt(traj.values[i][t]) for i in ids]
        w.writerow(row)


def trajectory(
    point0: PhasePoint,
    spec: PotentialSpec,
    ctx: ModelContext,
    steps: int,
    invariant_ids: Sequence[str] = (),
    params: dict | None = None,
) -> Trajectory:
    """Iterate the map ``steps`` times, recording generators and invariants.

    Raises DivergenceError on non-finite state or when the sup-norm of the
    state exceeds DIVERGENCE_BOUND.
    """
    from .invariants import eval_invariant

    if steps < 0:
        raise ValueError("steps must be >= 0")
    ctx = ctx.as_floats()
    params = dict(spec.params() if params is None else params)
    traj = Trajectory(ctx, values={i: [] for i in invariant_ids})

    def record(pt):
        traj.points.append(pt)
        traj.generators.append(realize(pt, ctx))
        for inv in invariant_ids:
            traj.values[inv].append(float(eval_invariant(inv, pt, ctx, params)))

    pt = PhasePoint(tuple(float(x) for x in point0.q), tuple(float(x) for x in point0.p))
    record(pt)
    for t in range(1, steps + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                pt = step_phase(pt, spec, ctx)
        except NonFiniteStateError:
            raise DivergenceError(t, "non-finite state") from None
        x = pt.as_array()
        if np.max(np.abs(x)) > DIVERGENCE_BOUND:
            raise DivergenceError(t, f"|state| exceeded {DIVERGENCE_BOUND:g}")
        record(pt)
    return traj

"""The two-photon Lie-Poisson algebra h6, its N-dof realization and Casimirs.

Generator names are the ASCII spellings ``K, Ap, Am, Bp, Bm, M`` of
K, A+, A-, B+, B-, M.  Sign convention: the Lie-Poisson bracket carries the
same structure constants as the commutator table, ``{J_i, J_j} = s_ij^k J_k``;
this is the only place the table lives.

Every function that takes numbers is written with plain arithmetic so the
same code evaluates floats, Fractions, dual numbers and exact polynomials.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from typing import Sequence

import numpy as np

from .polynomial import MultiPoly

GENERATORS = ("K", "Ap", "Am", "Bp", "Bm", "M")


class NonFiniteStateError(ValueError):
    """A phase point with an inf or nan entry."""


def _structure_table() -> dict[tuple[str, str], dict[str, int]]:
    # {X, Y} -> linear combination of generators
    upper = {
        ("K", "Ap"): {"Ap": 1},
        ("K", "Am"): {"Am": -1},
        ("Am", "Ap"): {"M": 1},
        ("K", "Bp"): {"Bp": 2},
        ("K", "Bm"): {"Bm": -2},
        ("Bm", "Bp"): {"K": 4, "M": 2},
        ("Ap", "Bm"): {"Am": -2},
        ("Ap", "Bp"): {},
        ("Am", "Bp"): {"Ap": 2},
        ("Am", "Bm"): {},
    }
    table: dict[tuple[str, str], dict[str, int]] = {}
    for (x, y), comb in upper.items():
        table[(x, y)] = comb
        table[(y, x)] = {k: -v for k, v in comb.items()}
    return table


STRUCTURE = _structure_table()


def generator_bracket(x: str, y: str) -> MultiPoly:
    """``{x, y}`` for two generator names, as a linear polynomial."""
    for name in (x, y):
        if name not in GENERATORS:
            raise ValueError(f"{name!r} is not an h6 generator")
    comb = STRUCTURE.get((x, y), {})
    out = MultiPoly(GENERATORS)
    for name, c in comb.items():
        out = out + c * MultiPoly.variable(name, GENERATORS)
    return out


def generator_poly(name: str) -> MultiPoly:
    return MultiPoly.variable(name, GENERATORS)


def lie_poisson_bracket(f: MultiPoly, g: MultiPoly) -> MultiPoly:
    """Lie-Poisson bracket on the symmetric algebra, extended by Leibniz.

    ``{f, g} = sum_ij df/dJ_i dg/dJ_j {J_i, J_j}``.
    """
    for poly in (f, g):
        if not isinstance(poly, MultiPoly) or poly.variables != GENERATORS:
            raise ValueError(f"bracket arguments must be polynomials over {GENERATORS}")
    df = {x: f.diff(x) for x in GENERATORS}
    dg = {y: g.diff(y) for y in GENERATORS}
    out = MultiPoly(GENERATORS)
    for (x, y), comb in STRUCTURE.items():
        if not comb or df[x].is_zero() or dg[y].is_zero():
            continue
        out = out + df[x] * dg[y] * generator_bracket(x, y)
    return out


# phase space


def phase_variables(n: int) -> tuple[str, ...]:
    return tuple(f"q{i}" for i in range(1, n + 1)) + tuple(f"p{i}" for i in range(1, n + 1))


def _dof_of(variables: tuple[str, ...]) -> int:
    n, rem = divmod(len(variables), 2)
    if rem or n < 1 or variables != phase_variables(n):
        raise ValueError(f"not a canonical phase-variable set: {variables}")
    return n


def canonical_bracket(f: MultiPoly, g: MultiPoly) -> MultiPoly:
    """``sum_i df/dq_i dg/dp_i - df/dp_i dg/dq_i`` on exact polynomials."""
    if f.variables != g.variables:
        raise ValueError(f"variable-set mismatch: {f.variables} vs {g.variables}")
    n = _dof_of(f.variables)
    out = MultiPoly(f.variables)
    for i in range(1, n + 1):
        q, p = f"q{i}", f"p{i}"
        out = out + f.diff(q) * g.diff(p) - f.diff(p) * g.diff(q)
    return out


@dataclass(frozen=True)
class PhasePoint:
    """Darboux coordinates ``(q, p)``; entries may be any scalar type."""

    q: tuple
    p: tuple

    def __post_init__(self):
        q, p = tuple(self.q), tuple(self.p)
        if len(q) != len(p) or not q:
            raise ValueError(f"q and p must have the same length >= 1, got {len(q)} and {len(p)}")
        for x in q + p:
            if isinstance(x, float) and not np.isfinite(x):
                raise NonFiniteStateError("phase point entries must be finite")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def n(self) -> int:
        return len(self.q)

    @classmethod
    def from_array(cls, x: Sequence[float]) -> "PhasePoint":
        x = [float(v) for v in x]
        n = len(x) // 2
        return cls(tuple(x[:n]), tuple(x[n:]))

    def as_array(self) -> np.ndarray:
        return np.array([float(v) for v in self.q + self.p])

    @classmethod
    def symbolic(cls, n: int) -> "PhasePoint":
        """The coordinate functions as exact polynomials over ``q1..qN, p1..pN``."""
        names = phase_variables(n)
        polys = MultiPoly.gens(names)
        return cls(polys[:n], polys[n:])


def default_lambda(n: int) -> tuple[Fraction, ...]:
    """(1, 1/2, ..., 1/N): distinct non-zero entries."""
    return tuple(Fraction(1, k) for k in range(1, n + 1))


@dataclass(frozen=True)
class ModelContext:
    lam: tuple
    h: float = 1.0

    def __post_init__(self):
        lam = tuple(self.lam)
        if not lam:
            raise ValueError("lambda must have at least one entry")
        if all(x == 0 for x in lam):
            raise ValueError("lambda must not be the zero vector")
        if not self.h > 0:
            raise ValueError(f"step h must be positive, got {self.h}")
        object.__setattr__(self, "lam", lam)

    @property
    def n(self) -> int:
        return len(self.lam)

    @classmethod
    def default(cls, n: int, h: float = 1.0, exact: bool = False) -> "ModelContext":
        lam = default_lambda(n)
        return cls(lam if exact else tuple(float(x) for x in lam), h)

    def as_floats(self) -> "ModelContext":
        return ModelContext(tuple(float(x) for x in self.lam), self.h)


@dataclass(frozen=True)
class GeneratorState:
    K: object
    Ap: object
    Am: object
    Bp: object
    Bm: object
    M: object

    def as_tuple(self) -> tuple:
        return (self.K, self.Ap, self.Am, self.Bp, self.Bm, self.M)

    def as_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.as_tuple()])

    def as_dict(self) -> dict:
        return dict(zip(GENERATORS, self.as_tuple()))

    @classmethod
    def from_sequence(cls, values) -> "GeneratorState":
        return cls(*values)


def _dot(a, b):
    total = 0
    for x, y in zip(a, b):
        total = total + x * y
    return total


def realize(point: PhasePoint, ctx: ModelContext) -> GeneratorState:
    """N-dof symplectic realization of the six generators."""
    if point.n != ctx.n:
        raise ValueError(f"dimension mismatch: point has N={point.n}, lambda has N={ctx.n}")
    lam, q, p = ctx.lam, point.q, point.p
    M = _dot(lam, lam)
    return GeneratorState(
        K=_dot(q, p) - M / 2,
        Ap=_dot(lam, p),
        Am=_dot(lam, q),
        Bp=_dot(p, p),
        Bm=_dot(q, q),
        M=M,
    )


def casimir(gen: GeneratorState):
    """Quartic Casimir of h6 evaluated on a generator state."""
    K, Ap, Am, Bp, Bm, M = gen.as_tuple()
    s = K + M / 2
    return M * Bp * Bm - Bp * Am**2 - Bm * Ap**2 - M * s**2 + 2 * Am * Ap * s


def casimir_poly() -> MultiPoly:
    """The Casimir as an exact polynomial in the generators."""
    gens = GeneratorState(*MultiPoly.gens(GENERATORS))
    return casimir(gens)


def _triple_term(i, j, k, lam, q, p):
    return (
        lam[i] * (p[j] * q[k] - p[k] * q[j])
        + lam[j] * (p[k] * q[i] - p[i] * q[k])
        + lam[k] * (p[i] * q[j] - p[j] * q[i])
    )


def _triple_sum(indices, lam, q, p):
    total = 0
    for i, j, k in combinations(indices, 3):
        t = _triple_term(i, j, k, lam, q, p)
        total = total + t * t
    return total


def _check_m(m: int, n: int):
    if not 2 <= m <= n:
        raise ValueError(f"Casimir order m must satisfy 2 <= m <= N={n}, got {m}")


def left_casimir(m: int, point: PhasePoint, ctx: ModelContext):
    """C^[m]: triple sum over 1 <= i < j < k <= m."""
    _check_m(m, point.n)
    return _triple_sum(range(m), ctx.lam, point.q, point.p)


def right_casimir(m: int, point: PhasePoint, ctx: ModelContext):
    """C_[m]: triple sum over N-m+1 <= i < j < k <= N."""
    n = point.n
    _check_m(m, n)
    return _triple_sum(range(n - m, n), ctx.lam, point.q, point.p)


def realize_poly(f: MultiPoly, ctx: ModelContext) -> MultiPoly:
    """Apply the realization D to a polynomial in the generators.

    ``ctx.lam`` must hold exact rationals.
    """
    if f.variables != GENERATORS:
        raise ValueError(f"expected a polynomial over {GENERATORS}")
    gen = realize(PhasePoint.symbolic(ctx.n), ctx)
    names = phase_variables(ctx.n)
    mapping = {}
    for name, value in gen.as_dict().items():
        mapping[name] = value if isinstance(value, MultiPoly) else MultiPoly.constant(value, names)
    return f.substitute(mapping, names)

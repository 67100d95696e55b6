"""Classification machinery: determinant lemma, the matrix calM, the
coalgebra-symmetry PDE residuals, the quasi-standard closure probe, and the
sampling-based invariant search over generator monomials."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from .algebra import GeneratorState, ModelContext, PhasePoint, realize
from .autodiff import Dual
from .dynamics import step_phase
from .expr import ExprTree, parse_expr
from .potentials import DPIN, PotentialSpec, consistency_flag, grad_q

# determinant lemma


def mn_det_closed(n: int, mu, nu):
    return (mu - nu) ** (n - 1) * (mu + (n - 1) * nu)


def bareiss_det(matrix) -> Fraction:
    """Fraction-free Gaussian elimination with row pivoting."""
    a = [[Fraction(x) for x in row] for row in matrix]
    n = len(a)
    if any(len(row) != n for row in a):
        raise ValueError("matrix must be square")
    if n == 0:
        return Fraction(1)
    sign = 1
    prev = Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((i for i in range(k + 1, n) if a[i][k] != 0), None)
            if swap is None:
                return Fraction(0)
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def mn_matrix(n: int, mu, nu) -> list[list]:
    return [[mu if i == j else nu for j in range(n)] for i in range(n)]


def mn_det(n: int, mu, nu) -> tuple[Fraction, Fraction]:
    """(closed form, elimination value) for det M_n(mu, nu)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    mu, nu = Fraction(mu), Fraction(nu)
    return mn_det_closed(n, mu, nu), bareiss_det(mn_matrix(n, mu, nu))


# calM and the PDE system


def calM(q, lam) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if q.shape != lam.shape:
        raise ValueError(f"dimension mismatch: q has {q.size}, lambda has {lam.size}")
    lq, q2, l2 = lam @ q, q @ q, lam @ lam
    Nmat = np.outer(q, l2 * q - lq * lam) + np.outer(lam, q2 * lam - lq * q)
    return (lq * lq - q2 * l2) * np.eye(q.size) + Nmat


def _raw_gradient(V, q: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    if isinstance(V, ExprTree):
        out = V(**dict(zip(V.variables, Dual.seed(q))))
        return out.grad.copy() if isinstance(out, Dual) else np.zeros_like(q)
    g = np.empty_like(q)
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = eps
        g[i] = (V(q + e) - V(q - e)) / (2 * eps)
    return g


def raw_expr(text: str, n: int) -> ExprTree:
    """An expression in q1..qN, differentiated exactly by dual numbers."""
    return parse_expr(text, tuple(f"q{i}" for i in range(1, n + 1)))


@dataclass
class PdeResidual:
    nonlinear: float
    linear: list
    nonlinear_scale: float
    linear_scale: float

    def relative(self) -> tuple[float, float]:
        lin = max(abs(x) for x in self.linear) if self.linear else 0.0
        return (
            abs(self.nonlinear) / max(1e-300, self.nonlinear_scale),
            lin / max(1e-300, self.linear_scale),
        )


def pde_residual(V, point: PhasePoint | np.ndarray, ctx: ModelContext) -> PdeResidual:
    """Left minus right of the nonlinear and linear coalgebra PDEs.

    ``V`` is a PotentialSpec, an ExprTree over q1..qN, or a callable of q
    (finite differences).  Only q is used from ``point``.
    """
    q = np.asarray(point.q if isinstance(point, PhasePoint) else point, dtype=float)
    lam = np.array([float(x) for x in ctx.lam])
    if isinstance(V, PotentialSpec):
        g = grad_q(V, PhasePoint(tuple(q), tuple(np.zeros_like(q))), ctx)
    else:
        g = _raw_gradient(V, q)
    lq, q2, l2 = lam @ q, q @ q, lam @ lam
    gram = l2 * q2 - lq * lq
    w = lam * (q @ g) - q * (lam @ g)
    nonlinear = gram * (g @ g) - w @ w
    linear = calM(q, lam) @ g
    size = l2 * q2
    gn = float(np.linalg.norm(g))
    return PdeResidual(
        nonlinear=float(nonlinear),
        linear=linear.tolist(),
        nonlinear_scale=max(1.0, size * gn * gn),
        linear_scale=max(1.0, size * gn),
    )


# quasi-standard closure probe

ELL_VARIANTS = {
    "identity": "X",
    "quadratic": "X + 0.1*X^2",
    "scale": "2*X",
}


def _ell(ell) -> ExprTree:
    if isinstance(ell, ExprTree):
        return ell
    text = ELL_VARIANTS.get(ell, ell)
    return parse_expr(text, ("X",))


def _ell_prime(ell: ExprTree, xi: float) -> float:
    (x,) = Dual.seed([xi])
    out = ell(x)
    return float(out.grad[0]) if isinstance(out, Dual) else 0.0


def bp_next(ell: ExprTree, q_now: np.ndarray, q_next: np.ndarray) -> float:
    """B+(t+h) = sum [ell'(q_k(t+h) q_k(t))]^2 q_k(t)^2."""
    total = 0.0
    for a, b in zip(q_now, q_next):
        d = _ell_prime(ell, a * b)
        if d == 0:
            raise ValueError(f"ell' vanishes at xi = {a * b!r}; ell is not invertible there")
        total += d * d * a * a
    return total


def closure_probe(ell, q_now, q_next, eps: float = 1e-6) -> float:
    """Max |dB+(t+h)/dq_l(t+h)| by central differences; 0 iff closure survives."""
    ell = _ell(ell)
    q_now = np.asarray(q_now, dtype=float)
    q_next = np.asarray(q_next, dtype=float)
    worst = 0.0
    for l in range(q_next.size):
        e = np.zeros_like(q_next)
        e[l] = eps
        d = (bp_next(ell, q_now, q_next + e) - bp_next(ell, q_now, q_next - e)) / (2 * eps)
        worst = max(worst, abs(d))
    return worst


# invariant search

BASIS_LABELS = {
    1: ("K", "Ap", "Am", "Bp", "Bm"),
    2: ("Bp", "Bm", "K", "Ap*Am", "Ap", "Am", "Ap^2", "Am^2"),
}


def basis_values(gen: GeneratorState, degree: int) -> np.ndarray:
    K, Ap, Am, Bp, Bm, _ = (float(x) for x in gen.as_tuple())
    if degree == 1:
        return np.array([K, Ap, Am, Bp, Bm])
    if degree == 2:
        return np.array([Bp, Bm, K, Ap * Am, Ap, Am, Ap * Ap, Am * Am])
    raise ValueError("degree must be 1 or 2")


def _sample(rng, spec, n):
    while True:
        x = rng.uniform(-1.0, 1.0, 2 * n)
        if isinstance(spec, DPIN) and x[:n] @ x[:n] <= 0.1:
            continue
        return PhasePoint.from_array(x)


def condition_rows(spec: PotentialSpec, degree: int, ctx: ModelContext, samples: int, rng) -> np.ndarray:
    rows = []
    for _ in range(samples):
        x = _sample(rng, spec, ctx.n)
        y = step_phase(x, spec, ctx)
        rows.append(basis_values(realize(y, ctx), degree) - basis_values(realize(x, ctx), degree))
    return np.array(rows)


@dataclass
class SearchResult:
    family: str
    degree: int
    labels: list
    vectors: list
    singular_values: list
    verification_residuals: list
    condition_number: float
    warnings: list = field(default_factory=list)

    @property
    def dimension(self) -> int:
        return len(self.vectors)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dimension"] = self.dimension
        return d


def invariant_search(
    spec: PotentialSpec,
    degree: int,
    ctx: ModelContext,
    samples: int | None = None,
    seed: int = 0,
    threshold: float = 1e-9,
) -> SearchResult:
    """Invariants linear in the basis monomials, found as a numerical nullspace.

    The constant monomial never enters the difference rows, which is the
    same as quotienting it out.
    """
    labels = BASIS_LABELS.get(degree)
    if labels is None:
        raise ValueError("degree must be 1 or 2")
    nb = len(labels)
    samples = 4 * nb if samples is None else samples
    if samples < 3 * nb:
        raise ValueError(f"need at least {3 * nb} samples for a degree-{degree} search")
    ctx = ctx.as_floats()
    rng = np.random.default_rng(seed)
    warnings = []
    if not consistency_flag(spec, seed=seed):
        warnings.append("potential does not depend on Am; the system is sl2-reducible")
    A = condition_rows(spec, degree, ctx, samples, rng)
    _, s, vt = np.linalg.svd(A)
    kept = int(np.sum(s >= threshold * s[0])) if s[0] > 0 else 0
    vecs = vt[kept:]
    fresh = condition_rows(spec, degree, ctx, samples, rng)
    row_scale = max(1.0, float(np.max(np.abs(fresh))))
    residuals = [float(np.max(np.abs(fresh @ v)) / row_scale) for v in vecs]
    smallest = s[kept - 1] if kept else 0.0
    cond = float(s[0] / smallest) if smallest > 0 else float("inf")
    return SearchResult(
        family=spec.family,
        degree=degree,
        labels=list(labels),
        vectors=[v.tolist() for v in vecs],
        singular_values=s.tolist(),
        verification_residuals=residuals,
        condition_number=cond,
        warnings=warnings,
    )


def expected_search_vectors(family: str, params: dict, M: float, degree: int) -> np.ndarray:
    """Known invariant coefficient vectors, rows over BASIS_LABELS[degree]."""
    if family == "V1" and degree == 1:
        k, a = params["varkappa"], params["alpha_plus"]
        return np.array([[k, a, a, 1.0, 1.0]])
    if family == "V2I" and degree == 1:
        return np.array([[0.0, 1.0, -1.0, 0.0, 0.0]])
    if family == "V2II" and degree == 2:
        eta, zeta, k = params["eta"], params["zeta"], params["kappa"]
        return np.array(
            [
                [M, M, k * M, -k, 0.0, 0.0, -1.0, -1.0],
                [0.0, 0.0, 0.0, eta * M + k, zeta * M, zeta * M, 1.0, 1.0],
            ]
        )
    raise ValueError(f"no reference vectors for {family} at degree {degree}")


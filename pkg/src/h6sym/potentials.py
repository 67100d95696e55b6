"""Classified potential families V(Am, Bm, M) and their first partials.

Each family is a small dataclass with a ``formula(Am, Bm, M)`` written in
plain arithmetic; partials in (Am, Bm) come from one dual-number pass, so
the same formula serves value and gradient.  Singular families take
user expressions F(X, Y) or G(X, Y); their ``scale`` field multiplies the
expression (the continuum scalings use ``scale = h^2``).

Nondegeneracy (G_YYY != 0, F_YY != 0) is not enforced: degenerate choices
only fall back onto the polynomial families.
"""

from __future__ import annotations

import math
from dataclasses import MISSING, dataclass, fields
from typing import ClassVar

import numpy as np

from .algebra import ModelContext, PhasePoint, realize
from .autodiff import DomainError, Dual
from .autodiff import log as _log
from .expr import ExprTree, parse_expr


class PotentialDomainError(DomainError):
    def __init__(self, family: str, Am, Bm, M, reason: str):
        super().__init__(
            f"{family} potential undefined at (Am, Bm, M) = ({Am!r}, {Bm!r}, {M!r}): {reason}"
        )
        self.family = family
        self.where = (Am, Bm, M)
        self.reason = reason


def _expr(value, variables=("X", "Y")) -> ExprTree:
    if isinstance(value, ExprTree):
        return value
    return parse_expr(value, variables)


def _check_finite(name, value):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ValueError(f"parameter {name} must be a finite real number, got {value!r}")


class PotentialSpec:
    """Base class; subclasses are frozen dataclasses with a ``family`` tag."""

    family: ClassVar[str] = ""
    numeric: ClassVar[tuple[str, ...]] = ()
    expressions: ClassVar[tuple[str, ...]] = ()

    def __post_init__(self):
        for name in self.numeric:
            _check_finite(name, getattr(self, name))

    def formula(self, Am, Bm, M):  # pragma: no cover - abstract
        raise NotImplementedError

    def params(self) -> dict:
        """Numeric parameters by their canonical names."""
        return {name: getattr(self, name) for name in self.numeric}

    def to_dict(self) -> dict:
        out = {"family": self.family}
        out.update({k: float(v) for k, v in self.params().items()})
        for name in self.expressions:
            out[name] = getattr(self, name).unparse()
        if getattr(self, "scale", 1.0) != 1.0:
            out["scale"] = float(self.scale)
        return out


@dataclass(frozen=True)
class V1(PotentialSpec):
    """V = -alpha_plus*Am - (varkappa/2)*Bm."""

    alpha_plus: float
    varkappa: float
    family: ClassVar[str] = "V1"
    numeric: ClassVar[tuple[str, ...]] = ("alpha_plus", "varkappa")

    def formula(self, Am, Bm, M):
        return -self.alpha_plus * Am - (self.varkappa / 2) * Bm


@dataclass(frozen=True)
class V2I(PotentialSpec):
    """V = ((kappa+2)/M * Am^2 - kappa*Bm) / 2."""

    kappa: float
    family: ClassVar[str] = "V2I"
    numeric: ClassVar[tuple[str, ...]] = ("kappa",)

    def formula(self, Am, Bm, M):
        return ((self.kappa + 2) / M * Am * Am - self.kappa * Bm) / 2


@dataclass(frozen=True)
class V2II(PotentialSpec):
    """V = -(eta/2)*Am^2 - zeta*Am - (kappa/2)*Bm."""

    eta: float
    zeta: float
    kappa: float
    family: ClassVar[str] = "V2II"
    numeric: ClassVar[tuple[str, ...]] = ("eta", "zeta", "kappa")

    def formula(self, Am, Bm, M):
        return -(self.eta / 2) * Am * Am - self.zeta * Am - (self.kappa / 2) * Bm


@dataclass(frozen=True)
class V1s(PotentialSpec):
    """V = Bm + F(M, M*Bm - Am^2)."""

    F: ExprTree
    scale: float = 1.0
    family: ClassVar[str] = "V1s"
    expressions: ClassVar[tuple[str, ...]] = ("F",)

    def __post_init__(self):
        object.__setattr__(self, "F", _expr(self.F))
        _check_finite("scale", self.scale)

    def formula(self, Am, Bm, M):
        return Bm + self.scale * self.F(M, M * Bm - Am * Am)


@dataclass(frozen=True)
class V2Is(PotentialSpec):
    """V = -(alpha/2)*Bm + G(M, Am)."""

    alpha: float
    G: ExprTree
    scale: float = 1.0
    family: ClassVar[str] = "V2Is"
    numeric: ClassVar[tuple[str, ...]] = ("alpha",)
    expressions: ClassVar[tuple[str, ...]] = ("G",)

    def __post_init__(self):
        object.__setattr__(self, "G", _expr(self.G))
        super().__post_init__()
        _check_finite("scale", self.scale)

    def formula(self, Am, Bm, M):
        return -(self.alpha / 2) * Bm + self.scale * self.G(M, Am)


@dataclass(frozen=True)
class V2IIs(PotentialSpec):
    """V = -(alpha/2)*Bm - (alpha_plus/M)*Am + F(M, M*Bm - Am^2)."""

    alpha: float
    alpha_plus: float
    F: ExprTree
    scale: float = 1.0
    family: ClassVar[str] = "V2IIs"
    numeric: ClassVar[tuple[str, ...]] = ("alpha", "alpha_plus")
    expressions: ClassVar[tuple[str, ...]] = ("F",)

    def __post_init__(self):
        object.__setattr__(self, "F", _expr(self.F))
        super().__post_init__()
        _check_finite("scale", self.scale)

    def formula(self, Am, Bm, M):
        return (
            -(self.alpha / 2) * Bm
            - (self.alpha_plus / M) * Am
            + self.scale * self.F(M, M * Bm - Am * Am)
        )


@dataclass(frozen=True)
class DPIN(PotentialSpec):
    """V = Am - Bm/2 + (alpha/2)*log(Bm); needs Bm > 0 along the orbit."""

    alpha: float
    family: ClassVar[str] = "dPIN"
    numeric: ClassVar[tuple[str, ...]] = ("alpha",)

    def formula(self, Am, Bm, M):
        return Am - Bm / 2 + (self.alpha / 2) * _log(Bm)


@dataclass(frozen=True)
class Custom(PotentialSpec):
    """Any expression in the variables Am, Bm, M."""

    expr: ExprTree
    family: ClassVar[str] = "Custom"
    expressions: ClassVar[tuple[str, ...]] = ("expr",)

    def __post_init__(self):
        object.__setattr__(self, "expr", _expr(self.expr, ("Am", "Bm", "M")))

    def formula(self, Am, Bm, M):
        return self.expr(Am=Am, Bm=Bm, M=M)


FAMILIES: dict[str, type] = {
    cls.family: cls for cls in (V1, V2I, V2II, V1s, V2Is, V2IIs, DPIN, Custom)
}
CLASSIFIED = ("V1", "V2I", "V2II", "V1s", "V2Is", "V2IIs", "dPIN")


def spec_from_dict(data: dict) -> PotentialSpec:
    """Build a spec from its JSON form, checking the family's schema."""
    if not isinstance(data, dict) or "family" not in data:
        raise ValueError("potential must be an object with a 'family' key")
    family = data["family"]
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {sorted(FAMILIES)}")
    cls = FAMILIES[family]
    names = [f.name for f in fields(cls)]
    required = [f.name for f in fields(cls) if f.default is MISSING]
    extra = set(data) - set(names) - {"family"}
    if extra:
        raise ValueError(f"unexpected keys for {family}: {sorted(extra)}")
    missing = [n for n in required if n not in data]
    if missing:
        raise ValueError(f"missing keys for {family}: {missing}")
    kwargs = {n: data[n] for n in names if n in data}
    return cls(**kwargs)


def eval_potential(spec: PotentialSpec, Am, Bm, M):
    """Return ``(V, dV/dAm, dV/dBm)`` as floats."""
    a, b = Dual.seed([Am, Bm])
    try:
        out = spec.formula(a, b, float(M))
    except DomainError as exc:
        raise PotentialDomainError(spec.family, Am, Bm, M, str(exc)) from None
    if isinstance(out, Dual):
        return out.value, float(out.grad[0]), float(out.grad[1])
    return float(out), 0.0, 0.0


def potential_partials(spec: PotentialSpec, Am, Bm, M):
    _, va, vb = eval_potential(spec, Am, Bm, M)
    return va, vb


def grad_q(spec: PotentialSpec, point: PhasePoint, ctx: ModelContext) -> np.ndarray:
    """Gradient of V(lambda.q, q.q, lambda.lambda) with respect to q."""
    gen = realize(point, ctx)
    _, va, vb = eval_potential(spec, float(gen.Am), float(gen.Bm), float(gen.M))
    lam = np.array([float(x) for x in ctx.lam])
    q = np.array([float(x) for x in point.q])
    return va * lam + 2.0 * vb * q


def consistency_flag(spec: PotentialSpec, samples: int = 100, seed: int = 0) -> bool:
    """True iff dV/dAm is non-negligible somewhere; False means sl2-reducible."""
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        Am = rng.uniform(-1.0, 1.0)
        M = rng.uniform(0.5, 2.0)
        Bm = Am * Am / M + rng.uniform(0.1, 1.0)
        try:
            _, va, _ = eval_potential(spec, Am, Bm, M)
        except DomainError:
            continue
        if abs(va) > 1e-12:
            return True
    return False

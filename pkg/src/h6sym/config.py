"""Run configuration: JSON schema, validation and resolution to model objects."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction

import jsonschema
import numpy as np

from .algebra import ModelContext, PhasePoint, default_lambda
from .continuum import ScalingRule
from .potentials import PotentialSpec, spec_from_dict

_NUM = {"type": "number"}
_VEC = {"type": "array", "items": _NUM, "minItems": 1}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["N"],
    "properties": {
        "N": {"type": "integer", "minimum": 1},
        "lambda": _VEC,
        "h": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
        "potential": {"type": "object", "required": ["family"]},
        "params": {"type": "object", "additionalProperties": _NUM},
        "initial": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "q": _VEC,
                "p": _VEC,
                "radius": {"type": "number", "exclusiveMinimum": 0},
                "equatorial": {"type": "boolean"},
            },
        },
        "continuum": {
            "type": "object",
            "additionalProperties": False,
            "required": ["family"],
            "properties": {
                "family": {"type": "string"},
                "omega": _NUM,
                "gamma": _NUM,
                "delta": _NUM,
                "f": {"type": "string"},
                "g": {"type": "string"},
                "Q0": _VEC,
                "P0": _VEC,
                "T": {"type": "number", "exclusiveMinimum": 0},
                "invariants": {"type": "array", "items": {"type": "string"}},
            },
        },
        "outputs": {"type": "object", "additionalProperties": {"type": "string"}},
    },
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    N: int
    lam: tuple
    h: float = 1.0
    seed: int = 0
    potential: PotentialSpec | None = None
    params: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    continuum: dict | None = None
    outputs: dict = field(default_factory=dict)

    @property
    def ctx(self) -> ModelContext:
        return ModelContext(tuple(float(x) for x in self.lam), self.h)

    def invariant_params(self) -> dict:
        """Family parameters overlaid with any explicit ``params``."""
        base = dict(self.potential.params()) if self.potential is not None else {}
        base.update(self.params)
        return base

    def require_potential(self) -> PotentialSpec:
        if self.potential is None:
            raise ConfigError("this command needs a 'potential' entry")
        return self.potential

    def initial_point(self) -> PhasePoint:
        """Explicit q/p if given, else uniform in [-radius, radius] from the seed."""
        n = self.N
        if "q" in self.initial and "p" in self.initial:
            q = np.array(self.initial["q"], dtype=float)
            p = np.array(self.initial["p"], dtype=float)
        else:
            r = self.initial.get("radius", 0.5)
            x = np.random.default_rng(self.seed).uniform(-r, r, 2 * n)
            q, p = x[:n], x[n:]
        if self.initial.get("equatorial", False):
            # shift p along lambda so that lambda.p = lambda.q
            lam = np.array([float(x) for x in self.lam])
            p = p + (lam @ q - lam @ p) / (lam @ lam) * lam
        return PhasePoint(tuple(q.tolist()), tuple(p.tolist()))

    def scaling_rule(self) -> ScalingRule:
        if self.continuum is None:
            raise ConfigError("this command needs a 'continuum' entry")
        c = self.continuum
        return ScalingRule(
            c["family"],
            omega=c.get("omega", 1.0),
            gamma=c.get("gamma", 0.0),
            delta=c.get("delta", 0.0),
            f=c.get("f"),
            g=c.get("g"),
        )

    def to_dict(self) -> dict:
        out = {
            "N": self.N,
            "lambda": [float(x) for x in self.lam],
            "h": self.h,
            "seed": self.seed,
            "params": dict(sorted(self.params.items())),
            "initial": self.initial,
            "outputs": self.outputs,
        }
        if self.potential is not None:
            out["potential"] = self.potential.to_dict()
        if self.continuum is not None:
            out["continuum"] = self.continuum
        return out


def load_config(data: dict, seed: int | None = None) -> RunConfig:
    """Validate a parsed JSON config; ``seed`` overrides the file's seed."""
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        path = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"config error at {path}: {exc.message}") from None
    n = data["N"]
    lam = tuple(data["lambda"]) if "lambda" in data else tuple(float(x) for x in default_lambda(n))
    if len(lam) != n:
        raise ConfigError(f"lambda has {len(lam)} entries, N = {n}")
    if all(x == 0 for x in lam):
        raise ConfigError("lambda must not be the zero vector")
    initial = dict(data.get("initial", {}))
    for key in ("q", "p"):
        if key in initial and len(initial[key]) != n:
            raise ConfigError(f"initial {key} has {len(initial[key])} entries, N = {n}")
    if ("q" in initial) != ("p" in initial):
        raise ConfigError("initial needs both q and p, or neither")
    potential = None
    if "potential" in data:
        try:
            potential = spec_from_dict(data["potential"])
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"config error at potential: {exc}") from None
    cfg = RunConfig(
        N=n,
        lam=lam,
        h=float(data.get("h", 1.0)),
        seed=data.get("seed", 0) if seed is None else seed,
        potential=potential,
        params=dict(data.get("params", {})),
        initial=initial,
        continuum=dict(data["continuum"]) if "continuum" in data else None,
        outputs=dict(data.get("outputs", {})),
    )
    if cfg.continuum is not None:
        try:
            cfg.scaling_rule()
        except ValueError as exc:
            raise ConfigError(f"config error at continuum: {exc}") from None
    return cfg


def read_config(path, seed: int | None = None) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    return load_config(data, seed)


def exact_lambda(cfg: RunConfig) -> tuple:
    return tuple(Fraction(x) for x in cfg.lam)

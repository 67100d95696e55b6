"""Batch command-line front end.

Exit codes: 0 pass, 1 usage or config error, 2 numerical failure.
JSON goes to ``--out`` if given, else stdout; keys are sorted so equal
inputs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .algebra import ModelContext
from .classify import ELL_VARIANTS, calM, closure_probe, invariant_search, mn_det, pde_residual, raw_expr
from .config import ConfigError, RunConfig, read_config
from .continuum import EXPANSIONS, convergence_order, expansion_check
from .dynamics import DivergenceError, trajectory, write_trajectory_csv
from .invariants import (
    SET_FAMILY,
    conservation_report,
    independence_test,
    involution_test,
    numerical_rank,
    registered_ids,
)
from .potentials import PotentialDomainError

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _clean(obj):
    """Make a payload JSON-safe: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, Fraction):
        return str(obj)
    return obj


def dumps(payload: dict) -> str:
    return json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _write_text(text: str, out: str | None):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def _envelope(command: str, config: dict, result: dict) -> dict:
    return {"command": command, "version": __version__, "config": config, "result": result}


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _float_list(text: str) -> list[float]:
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"not a comma-separated list of numbers: {text!r}") from None
    if not values:
        raise UsageError("empty number list")
    return values


def _load(args) -> RunConfig:
    if args.config is None:
        raise UsageError("--config is required for this command")
    return read_config(args.config, seed=args.seed)


# commands


def cmd_simulate(args) -> int:
    cfg = _load(args)
    spec = cfg.require_potential()
    ids = args.ids.split(",") if args.ids else registered_ids(spec.family, cfg.N)
    steps = 100 if args.steps is None else args.steps
    try:
        traj = trajectory(cfg.initial_point(), spec, cfg.ctx, steps, ids, cfg.invariant_params())
    except (DivergenceError, PotentialDomainError) as exc:
        step = getattr(exc, "step", None)
        sys.stderr.write(dumps(_envelope("simulate", cfg.to_dict(), {"error": str(exc), "step": step})))
        return EXIT_NUMERIC
    buf = io.StringIO()
    write_trajectory_csv(traj, buf)
    _write_text(buf.getvalue(), args.out)
    if args.out is not None:
        summary = {"rows": len(traj), "invariants": ids, "csv": args.out}
        sys.stdout.write(dumps(_envelope("simulate", cfg.to_dict(), summary)))
    return EXIT_OK


def cmd_check(args) -> int:
    cfg = _load(args)
    spec = cfg.require_potential()
    steps = 10_000 if args.steps is None else args.steps
    tol = 1e-7 if args.tol is None else args.tol
    ids = registered_ids(spec.family, cfg.N)
    try:
        traj = trajectory(cfg.initial_point(), spec, cfg.ctx, steps, ids, cfg.invariant_params())
    except (DivergenceError, PotentialDomainError) as exc:
        result = {"error": str(exc), "step": getattr(exc, "step", None), "pass": False}
        _write_text(dumps(_envelope("check", cfg.to_dict(), result)), args.out)
        return EXIT_NUMERIC
    drift = conservation_report(traj, ids)
    ok = all(v < tol for v in drift.values())
    result = {"steps": steps, "tol": tol, "drift": drift, "pass": ok}
    _write_text(dumps(_envelope("check", cfg.to_dict(), result)), args.out)
    return EXIT_OK if ok else EXIT_NUMERIC


def _set_name(args, cfg: RunConfig) -> str:
    if args.set is not None:
        return args.set
    fam = cfg.require_potential().family
    for name, f in SET_FAMILY.items():
        if f == fam:
            return name
    raise UsageError(f"no invariant set for family {fam}; pass --set")


def cmd_rank(args) -> int:
    cfg = _load(args)
    tol = 1e-8 if args.tol is None else args.tol
    samples = 5 if args.samples is None else args.samples
    rep = independence_test(_set_name(args, cfg), cfg.ctx, cfg.invariant_params(), samples, cfg.seed, tol)
    _write_text(dumps(_envelope("rank", cfg.to_dict(), rep.to_dict())), args.out)
    return EXIT_OK if rep.passed else EXIT_NUMERIC


def cmd_involution(args) -> int:
    cfg = _load(args)
    samples = 10 if args.samples is None else args.samples
    ctx = ModelContext(tuple(Fraction(x) for x in cfg.lam)) if args.mode != "numeric" else cfg.ctx
    res = involution_test(_set_name(args, cfg), ctx, cfg.invariant_params(), args.mode, samples, cfg.seed)
    _write_text(dumps(_envelope("involution", cfg.to_dict(), res)), args.out)
    return EXIT_OK if res["pass"] else EXIT_NUMERIC


def cmd_search(args) -> int:
    cfg = _load(args)
    degree = 1 if args.degree is None else args.degree
    res = invariant_search(cfg.require_potential(), degree, cfg.ctx, args.samples, cfg.seed)
    _write_text(dumps(_envelope("search", cfg.to_dict(), res.to_dict())), args.out)
    return EXIT_OK


def cmd_classify(args) -> int:
    sub = args.sub
    seed = 0 if args.seed is None else args.seed
    rng = np.random.default_rng(seed)
    if sub == "mn-det":
        closed, elim = mn_det(args.n, Fraction(args.mu), Fraction(args.nu))
        conf = {"n": args.n, "mu": args.mu, "nu": args.nu}
        result = {"closed": closed, "elimination": elim, "pass": closed == elim}
    elif sub == "calm-rank":
        n = args.n
        samples = 100 if args.samples is None else args.samples
        tol = 1e-10 if args.tol is None else args.tol
        special = numerical_rank(calM(np.ones(n), np.eye(n)[0]), tol)
        ranks = [numerical_rank(calM(rng.normal(size=n), rng.normal(size=n)), tol) for _ in range(samples)]
        conf = {"n": n, "samples": samples, "seed": seed, "tol": tol}
        ok = special == n - 2 and all(n - 2 <= r <= n for r in ranks)
        result = {"special_point_rank": special, "random_ranks": ranks, "pass": ok}
    elif sub == "pde-check":
        if args.config is not None:
            cfg = read_config(args.config, seed=args.seed)
            V, ctx, conf = cfg.require_potential(), cfg.ctx, cfg.to_dict()
            q = np.asarray(cfg.initial_point().q)
        else:
            if args.expr is None or args.lam is None:
                raise UsageError("pde-check needs --config, or --expr with --lambda")
            lam = _float_list(args.lam)
            V, ctx = raw_expr(args.expr, len(lam)), ModelContext(tuple(lam))
            q = np.asarray(_float_list(args.q)) if args.q else rng.uniform(-1, 1, len(lam))
            conf = {"expr": args.expr, "lambda": lam, "seed": seed}
        if q.size != ctx.n:
            raise UsageError(f"q has {q.size} entries, lambda has {ctx.n}")
        res = pde_residual(V, q, ctx)
        rel_n, rel_l = res.relative()
        result = {
            "q": q.tolist(),
            "nonlinear": res.nonlinear,
            "linear": res.linear,
            "relative_nonlinear": rel_n,
            "relative_linear": rel_l,
        }
    else:
        n = args.n
        q_now, q_next = rng.uniform(0.5, 1.5, n), rng.uniform(0.5, 1.5, n)
        sens = closure_probe(args.ell, q_now, q_next)
        conf = {"ell": ELL_VARIANTS.get(args.ell, args.ell), "n": n, "seed": seed}
        result = {"q_now": q_now.tolist(), "q_next": q_next.tolist(), "sensitivity": sens}
    _write_text(dumps(_envelope(f"classify {sub}", conf, result)), args.out)
    return EXIT_OK if result.get("pass", True) else EXIT_NUMERIC


def _plot_svg(path: Path, h, ys, ylabel: str, title: str):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "h6sym"
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(h, ys, "o-")
    ax.set_xlabel("h")
    ax.set_ylabel(ylabel)
    ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def cmd_continuum(args) -> int:
    cfg = _load(args)
    rule = cfg.scaling_rule()
    c = cfg.continuum
    h_list = _float_list(args.h_list) if args.h_list else [0.1, 0.05, 0.025, 0.0125]
    rng = np.random.default_rng(cfg.seed)
    Q0 = c.get("Q0") or rng.uniform(-0.5, 0.5, cfg.N).tolist()
    P0 = c.get("P0") or rng.uniform(-0.5, 0.5, cfg.N).tolist()
    if len(Q0) != cfg.N or len(P0) != cfg.N:
        raise UsageError("Q0 and P0 must have N entries")
    if args.mode == "order":
        try:
            res = convergence_order(rule, cfg.lam, Q0, P0, c.get("T", 1.0), h_list)
        except (DivergenceError, PotentialDomainError) as exc:
            result = {"error": str(exc)}
            sys.stdout.write(dumps(_envelope("continuum order", cfg.to_dict(), result)))
            return EXIT_NUMERIC
        result, ok = res.to_dict(), True
        header, rows, ylabel = ["h", "max_err"], zip(res.h, res.max_err), "max position error"
    else:
        inv = args.invariant or (c.get("invariants") or [None])[0]
        if inv is None:
            inv = next(i for (i, fam) in EXPANSIONS if fam == rule.family)
        res = expansion_check(inv, rule, cfg.lam, Q0, P0, h_list)
        result, ok = res.to_dict(), res.passed
        header, rows, ylabel = ["h", "residual"], zip(res.h, res.residual), f"{inv} residual"
    result["Q0"], result["P0"] = list(Q0), list(P0)
    rows = list(rows)
    if args.out is not None:
        out = Path(args.out)
        out.write_text(_csv_text(header, rows))
        svg = out.with_suffix(".svg")
        if all(y > 0 for _, y in rows):
            _plot_svg(svg, [r[0] for r in rows], [r[1] for r in rows], ylabel, f"{rule.family} {args.mode}")
            result["svg"] = str(svg)
        result["csv"] = str(out)
    sys.stdout.write(dumps(_envelope(f"continuum {args.mode}", cfg.to_dict(), result)))
    return EXIT_OK if ok else EXIT_NUMERIC


# parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="run configuration (JSON)")
    common.add_argument("--seed", type=int, help="overrides the config seed")
    common.add_argument("--out", help="output path; stdout if omitted")
    common.add_argument("--tol", type=float)
    common.add_argument("--samples", type=int)

    p = _Parser(prog="h6sym", description="Verification tools for h6 coalgebra-symmetric maps.")
    p.add_argument("--version", action="version", version=f"h6sym {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", parents=[common], help="iterate the map, write a trajectory CSV")
    s.add_argument("--steps", type=int)
    s.add_argument("--ids", help="comma-separated invariant ids")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("check", parents=[common], help="conservation drift of the family's invariants")
    s.add_argument("--steps", type=int)
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("rank", parents=[common], help="functional independence of an invariant set")
    s.add_argument("--set", choices=sorted(SET_FAMILY))
    s.set_defaults(func=cmd_rank)

    s = sub.add_parser("involution", parents=[common], help="pairwise Poisson brackets of a commuting set")
    s.add_argument("--set", choices=sorted(SET_FAMILY))
    s.add_argument("--mode", choices=["auto", "exact", "numeric"], default="auto")
    s.set_defaults(func=cmd_involution)

    s = sub.add_parser("search", parents=[common], help="invariant search over generator monomials")
    s.add_argument("--degree", type=int, choices=[1, 2])
    s.set_defaults(func=cmd_search)

    s = sub.add_parser("classify", help="classification machinery")
    csub = s.add_subparsers(dest="sub", required=True, parser_class=_Parser)
    c = csub.add_parser("mn-det", parents=[common])
    c.add_argument("--n", type=int, required=True)
    c.add_argument("--mu", required=True, help="rational, e.g. -3 or 2/5")
    c.add_argument("--nu", required=True)
    c = csub.add_parser("calm-rank", parents=[common])
    c.add_argument("--n", type=int, required=True)
    c = csub.add_parser("pde-check", parents=[common])
    c.add_argument("--expr", help="potential over q1..qN")
    c.add_argument("--lambda", dest="lam", help="comma-separated lambda")
    c.add_argument("--q", help="comma-separated evaluation point")
    c = csub.add_parser("closure-probe", parents=[common])
    c.add_argument("--ell", default="identity", help=f"one of {sorted(ELL_VARIANTS)} or an expression in X")
    c.add_argument("--n", type=int, default=3)
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("continuum", parents=[common], help="continuum-limit convergence and expansions")
    s.add_argument("mode", choices=["order", "expansion"])
    s.add_argument("--h-list", dest="h_list", help="comma-separated step sizes")
    s.add_argument("--invariant", help="invariant id for expansion mode")
    s.set_defaults(func=cmd_continuum)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ValueError, ZeroDivisionError, OSError) as exc:
        sys.stderr.write(f"h6sym: error: {exc}\n")
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

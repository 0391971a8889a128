"""Command line front end: ``matweight <command> [options]``.

Exit codes: 0 when every check passes, 2 when a numeric check fails,
3 for configuration errors.  Options may come from ``--config FILE.json``;
flags given on the command line override the file.  Options not listed below
are passed to the weight family as parameters (``--gamma 0.25``).
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

import numpy as np
import sympy

from . import balance as bal
from . import maximal as mx
from . import mfd
from . import plap
from .characteristics import (
    a_infinity, derived_scalars, doubling, lauzon_treil_a2, matrix_ap, reverse_holder, scalar_a1, scalar_ap,
)
from .cubes import CubeFamily
from .errors import WeightError
from .families import REGISTRY, default_grid, sample_family
from .fields import MappingField, ScalarField, SpdField
from .io import dump_json, write_field, write_table
from .verify import BUNDLES, run_bundle

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 2, 3


class ConfigError(Exception):
    pass


# ------------------------------------------------------------ option plumbing


def _number(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _family_params(extra):
    params = {}
    it = iter(extra)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, val = key.split("=", 1)
        else:
            try:
                val = next(it)
            except StopIteration:
                raise ConfigError(f"option {tok} needs a value") from None
        params[key.replace("-", "_")] = _number(val)
    return params


def _load_config(path):
    if path is None:
        return {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(cfg, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return cfg


def _merge(args, extra):
    """Config file values, overridden by explicit flags."""
    cfg = _load_config(args.config)
    params = dict(cfg.pop("parameters", {}) or {})
    params.update(_family_params(extra))
    for key, val in cfg.items():
        attr = key.replace("-", "_")
        if not hasattr(args, attr):
            raise ConfigError(f"config field {key!r} is not an option of '{args.command}'")
        if getattr(args, attr) is None:
            setattr(args, attr, val)
    args.params = params
    return args


def _family(args, name=None, mode="center", **defaults):
    name = name or args.family
    if name is None:
        raise ConfigError("--family is required")
    if name not in REGISTRY:
        raise ConfigError(f"unknown family {name!r}; registered: {', '.join(sorted(REGISTRY))}")
    fam_params = {k: v for k, v in args.params.items() if k in REGISTRY[name].defaults}
    unknown = set(args.params) - set(REGISTRY[name].defaults)
    if unknown:
        raise ConfigError(f"family {name!r} has no parameter(s) {sorted(unknown)}")
    fam_params = {**defaults, **fam_params}
    grid = default_grid(name, int(args.grid), **fam_params)
    return sample_family(name, grid, mode=mode, **fam_params)


def _out(args) -> Path:
    out = Path(args.out or "run")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _finish(args, report, passed):
    report = {"command": args.command, "seed": args.seed, "passed": bool(passed),
              "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(), **report}
    out = _out(args)
    dump_json(report, out / "report.json")
    print(f"{args.command}: {'pass' if passed else 'FAIL'} (report in {out / 'report.json'})")
    return EXIT_OK if passed else EXIT_FAIL


def _levels(args, grid):
    return CubeFamily.dyadic(grid, args.levels, shifted=bool(args.shifted))


# ------------------------------------------------------------ commands


def cmd_characteristic(args):
    W = _family(args)
    F = _levels(args, W.grid)
    kind = args.kind
    if kind == "ap":
        if args.p is None:
            raise ConfigError("--p is required for kind 'ap'")
        est = matrix_ap(W, args.p, F, seed=args.seed) if isinstance(W, SpdField) else scalar_ap(W, args.p, F)
    elif kind == "lauzon-treil":
        if not isinstance(W, SpdField):
            raise ConfigError("lauzon-treil needs a matrix family")
        lt = lauzon_treil_a2(W, F, args.directions)
        passed = args.expect is None or lt["verdict"] == args.expect
        return _finish(args, {"family": args.family, "lauzon_treil": lt}, passed)
    else:
        if isinstance(W, SpdField):
            raise ConfigError(f"kind {kind!r} needs a scalar family")
        if kind == "a1":
            est = scalar_a1(W, F)
        elif kind == "rh":
            if args.s is None:
                raise ConfigError("--s is required for kind 'rh'")
            est = reverse_holder(W, args.s, F)
        elif kind == "ainf":
            est = a_infinity(W, F)
        else:
            est = doubling(W, F)
    out = _out(args)
    write_table(out / "traces" / "per_level.csv", ["level", "sup", "growth"],
                [(k, s, (est.per_level_sup[k] / est.per_level_sup[k - 1]) if k else "")
                 for k, s in enumerate(est.per_level_sup)])
    print(f"value {est.value:.6g}  verdict {est.verdict}")
    passed = args.expect is None or est.verdict == args.expect
    return _finish(args, {"family": args.family, "parameters": args.params, "estimate": est}, passed)


def _scalar_pair(args, mode):
    obj = _family(args, mode=mode)
    if isinstance(obj, SpdField):
        v, w = derived_scalars(obj)
        return w, v
    if isinstance(obj, MappingField):
        rep = mfd.analyze(obj)
        return ScalarField(obj.grid, 1.0 / rep.K_O.values), rep.K_I
    return ScalarField(obj.grid, np.ones(obj.grid.shape)), obj


def cmd_balance(args):
    if args.p is None or args.q is None:
        raise ConfigError("--p and --q are required")
    w, v = _scalar_pair(args, "cell-average")
    rep = bal.balance_scan(w, v, args.p, args.q, seed=args.seed)
    out = _out(args)
    (out / "traces").mkdir(exist_ok=True)
    (out / "traces" / "worst_ball.csv").write_text(rep.worst_csv())
    print(f"slope {rep.loglog_slope:.4f}  verdict {rep.verdict}")
    passed = args.expect is None or rep.verdict == args.expect
    return _finish(args, {"family": args.family, "parameters": args.params, "balance": rep}, passed)


def cmd_maximal(args):
    w, v = _scalar_pair(args, "center")
    M = mx.pair_maximal(w, v)
    cs = mx.continuity_set(M)
    lams = args.lambdas or [2, 4, 8, 16, 32]
    wt = mx.weak_type_check(w, v, M, lams)
    out = _out(args)
    write_field(out / "rasters" / "maximal", M.scalar, name="M")
    write_field(out / "rasters" / "continuity_mask", cs.mask.astype(float), grid=w.grid, name="mask")
    write_field(out / "rasters" / "growth", np.where(np.isfinite(M.growth), M.growth, -1.0), grid=w.grid,
                name="growth")
    report = {"family": args.family, "radii": M.radii, "stability_tol": M.tol,
              "continuity_fraction": cs.fraction, "unstable_cells": len(cs.unstable_cells),
              "weak_type": {"table": [{"lambda": l, "ratio": r} for l, r in zip(wt.lambdas, wt.ratios)],
                            "empirical_C": wt.empirical_C}}
    print(f"continuity fraction {cs.fraction:.4f}  weak-type C {wt.empirical_C:.4g}")
    return _finish(args, report, True)


def cmd_mfd(args):
    f = _family(args)
    if not isinstance(f, MappingField):
        raise ConfigError(f"family {args.family!r} is not a mapping")
    t = args.t if args.t is not None else 1.5
    s = args.s if args.s is not None else 2.0
    cfg = mfd.ContinuityConfig(max_level=args.levels, seed=args.seed, method=args.method)
    res = mfd.mfd_continuity_report(f, (t, s), cfg)
    objs = res.pop("objects")
    rep = objs["report"]
    out = _out(args)
    write_field(out / "rasters" / "K_O", rep.K_O, name="K_O")
    write_field(out / "rasters" / "K_I", rep.K_I, name="K_I")
    write_field(out / "rasters" / "continuity_mask", objs["continuity"].mask.astype(float), grid=f.grid,
                name="mask")
    res["inequalities"] = mfd.distortion_inequality_check(rep)
    res["frobenius"] = mfd.frobenius_bound_check(rep)
    print(f"hypotheses {res['hypotheses']}")
    return _finish(args, {"family": args.family, **res}, res["hypotheses_hold"])


def _boundary(expr, n):
    syms = sympy.symbols("x y z")[:n] if n <= 3 else sympy.symbols(f"x1:{n + 1}")
    try:
        e = sympy.sympify(expr, locals={str(s): s for s in syms})
    except (sympy.SympifyError, SyntaxError, TypeError) as exc:
        raise ConfigError(f"cannot parse boundary expression {expr!r}: {exc}") from None
    extra = e.free_symbols - set(syms)
    if extra:
        raise ConfigError(f"boundary expression uses unknown symbols {sorted(map(str, extra))}")
    fn = sympy.lambdify(syms, e, "numpy")
    return lambda *X: np.broadcast_to(np.asarray(fn(*X), dtype=float), X[0].shape)


def cmd_solve(args):
    if args.p is None:
        raise ConfigError("--p is required")
    W = _family(args, name=args.family or "constant")
    if not isinstance(W, SpdField):
        raise ConfigError("solve needs a matrix family")
    bnd = _boundary(args.boundary or "x", W.grid.n)
    prob = plap.DirichletProblem(W.grid, W, args.p, bnd, epsilon=args.epsilon or 0.0)
    res = plap.solve(prob)
    out = _out(args)
    write_field(out / "rasters" / "u", res.u, name="u")
    write_table(out / "traces" / "energy.csv", ["iteration", "energy"], list(enumerate(res.energy_trace)))
    print(f"converged {res.converged}  weak residual {res.weak_residual:.3e}")
    return _finish(args, {"family": args.family or "constant", "boundary": args.boundary or "x",
                          "p": args.p, "solve": res}, res.converged)


def cmd_verify_example(args):
    if args.name not in BUNDLES:
        raise ConfigError(f"unknown example {args.name!r}; registered: {', '.join(sorted(BUNDLES))}")
    kw = {"seed": args.seed}
    if args.grid is not None:
        kw["N"] = int(args.grid)
    if args.levels is not None and args.name == "remark-5.2":
        kw["levels"] = int(args.levels)
    checks = run_bundle(args.name, **kw)
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}")
    return _finish(args, {"example": args.name, "checks": checks}, all(c.passed for c in checks))


# ------------------------------------------------------------ parser


def _common(p, grid_default=None):
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--grid", type=int, default=grid_default, help="cells per axis")
    p.add_argument("--levels", type=int, help="deepest dyadic level")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="run directory (default ./run)")
    p.add_argument("--family")
    for name in ("p", "q", "t", "s"):
        p.add_argument(f"--{name}", type=float)


def build_parser():
    ap = argparse.ArgumentParser(prog="matweight", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("characteristic", help="weight characteristic with refinement trace")
    _common(c, 256)
    c.add_argument("--kind", default="ap", choices=["ap", "a1", "rh", "ainf", "doubling", "lauzon-treil"])
    c.add_argument("--shifted", action="store_true", default=None)
    c.add_argument("--directions", type=int, default=64)
    c.add_argument("--expect", choices=["finite", "diverging"])
    c.set_defaults(func=cmd_characteristic)

    b = sub.add_parser("balance", help="balance condition scan")
    _common(b, 512)
    b.add_argument("--expect", choices=["holds", "fails"])
    b.set_defaults(func=cmd_balance, shifted=None)

    m = sub.add_parser("maximal", help="pair maximal function, continuity set, weak type")
    _common(m, 256)
    m.add_argument("--lambdas", type=float, nargs="+")
    m.set_defaults(func=cmd_maximal, shifted=None)

    d = sub.add_parser("mfd", help="distortion analysis and continuity pipeline")
    _common(d, 256)
    d.add_argument("--method", default="auto", choices=["auto", "analytic", "fd"])
    d.set_defaults(func=cmd_mfd, shifted=None)

    s = sub.add_parser("solve", help="degenerate p-Laplacian Dirichlet problem")
    _common(s, 128)
    s.add_argument("--boundary", help="expression in x, y (z) for the boundary data")
    s.add_argument("--epsilon", type=float)
    s.set_defaults(func=cmd_solve, shifted=None)

    v = sub.add_parser("verify-example", help="run the check bundle of a registered example")
    _common(v)
    v.add_argument("name")
    v.set_defaults(func=cmd_verify_example, shifted=None)
    return ap


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args, extra = parser.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        args = _merge(args, extra)
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WeightError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

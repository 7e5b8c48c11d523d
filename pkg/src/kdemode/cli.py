"""Command-line entry point: ``kde-mode <subcommand>``.

Exit codes: 0 success, 2 configuration or input error, 3 numeric or budget
failure.
"""

import argparse
import json
import logging
import sys

import numpy as np

from . import __version__
from .errors import DatasetError, DomainError, KdeModeError, UnsupportedOperation
from .gadget import gadget_report, load_edge_list
from .kde import KdeInstance, load_csv, save_csv
from .kernels import derivative_check, kappa, parse_kernel, rds_check, rds_params
from .lowdim import DEFAULT_BUDGET, brute_force_mode
from .meanshift import DEFAULT_ITERS, DEFAULT_TOL, multi_restart
from .pipeline import ExperimentConfig, PipelineError, run_pipeline
from .recovery import recover_convex, recover_nonconvex
from .sketch import (DEFAULT_CJL, JlFamily, load_sketch, make_jl, project, save_sketch,
                     sketch_with_retry, target_dim)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

log = logging.getLogger("kdemode")


def _emit(obj, out=None):
    text = json.dumps(obj, indent=2, sort_keys=True)
    if out:
        with open(out, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _family(name):
    try:
        fam = JlFamily[name.upper()]
    except KeyError:
        raise DomainError(f"unknown JL family {name!r}") from None
    if fam is JlFamily.CUSTOM:
        raise DomainError("the custom family cannot be drawn at random")
    return fam


def cmd_solve(args):
    inst = KdeInstance(load_csv(args.data), parse_kernel(args.kernel))
    if args.method == "meanshift":
        res = multi_restart(inst, args.restarts, args.iters, args.tol, args.seed,
                            args.record_trajectory)
    else:
        res = brute_force_mode(inst, args.eps, args.budget)
    _emit(res.to_dict(), args.out)


def cmd_sketch(args):
    data = load_csv(args.data)
    fam = _family(args.family)
    if args.verify:
        sk = sketch_with_retry(data, args.gamma, args.delta, fam, args.seed,
                               args.max_attempts, args.cjl, args.w)
    else:
        w = args.w or target_dim(data.n, args.gamma, args.delta, args.cjl)
        sk = project(make_jl(data.d, w, fam, args.gamma, args.seed), data)
    save_sketch(args.out, sk.pi)
    if args.projected:
        save_csv(args.projected, sk.projected.points)
    _emit({"w": sk.w, "d": data.d, "family": fam.name.lower(), "seed": sk.pi.seed,
           "gamma": args.gamma, "verified": bool(args.verify), "meta": sk.meta})


def _read_xtilde(path):
    rows = load_csv(path).points
    if rows.shape[0] != 1:
        raise DatasetError(f"{path}: expected exactly one row, found {rows.shape[0]}")
    return rows[0]


def cmd_recover(args):
    data = load_csv(args.data)
    kernel = parse_kernel(args.kernel)
    sk = project(load_sketch(args.sketch), data)
    x_tilde = _read_xtilde(args.xtilde)
    if args.mode == "convex":
        res = recover_convex(data, sk, x_tilde, kernel)
    else:
        res = recover_nonconvex(data, sk, x_tilde, args.eps, kernel, args.max_iters)
    _emit(res.to_dict(), args.out)


def _parse_dims(text):
    if text is None or text == "auto":
        return text
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise DomainError(f"--dims must be 'auto' or comma-separated integers, got {text!r}") from None


def cmd_experiment(args):
    overrides = {
        "data_path": args.data, "kernel": args.kernel, "eps": args.eps, "delta": args.delta,
        "c_jl": args.cjl, "dims": _parse_dims(args.dims), "trials": args.trials,
        "baseline_iters": args.baseline_iters, "baseline_restarts": args.baseline_restarts,
        "sketched_iters": args.sketched_iters, "sketched_restarts": args.sketched_restarts,
        "seed": args.seed, "method": args.method, "recovery": args.recovery,
        "family": args.family, "output": args.out,
    }
    if args.config:
        cfg = ExperimentConfig.from_json(args.config, **overrides)
    else:
        cfg = ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})
    try:
        report = run_pipeline(cfg)
    except PipelineError as exc:
        if exc.report is not None and not cfg.output:
            _emit(exc.report.to_dict())
        raise
    if not cfg.output:
        _emit(report.to_dict())
    else:
        _emit({"output": cfg.output, "baseline": report.baseline["value"],
               "aggregates": report.aggregates})


def cmd_gadget(args):
    g = load_edge_list(args.graph)
    _emit(gadget_report(g, args.k, verify=args.verify), args.out)


def cmd_kernels_check(args):
    spec = parse_kernel(args.kernel)
    grid = np.linspace(0.0, args.grid_max, args.points)
    vals = kappa(spec, grid)
    out = {
        "kernel": str(spec),
        "kappa_at_zero": float(kappa(spec, 0.0)),
        "non_increasing": bool(np.all(np.diff(vals) <= 0.0)),
        "bounded": bool(np.all((vals >= 0.0) & (vals <= 1.0))),
    }
    ok = out["kappa_at_zero"] == 1.0 and out["non_increasing"] and out["bounded"]
    if spec.differentiable:
        params = rds_params(spec)
        if params is not None:
            out["rds"] = rds_check(spec, params, grid)
            ok &= out["rds"]
        fails = derivative_check(spec, np.logspace(-8, 4, 2001))
        out["derivative_failures"] = int(fails.size)
        if fails.size:
            out["derivative_first_failure"] = float(fails[0])
        ok &= fails.size == 0
    out["ok"] = bool(ok)
    _emit(out)
    return EXIT_OK if ok else EXIT_NUMERIC


def build_parser():
    p = argparse.ArgumentParser(prog="kde-mode", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="approximate mode of a CSV dataset")
    s.add_argument("--data", required=True)
    s.add_argument("--kernel", required=True, help="kind[:alpha]@bandwidth")
    s.add_argument("--method", choices=["meanshift", "brute"], default="meanshift")
    s.add_argument("--restarts", type=int, default=60)
    s.add_argument("--iters", type=int, default=DEFAULT_ITERS)
    s.add_argument("--tol", type=float, default=DEFAULT_TOL)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--record-trajectory", action="store_true")
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("sketch", help="draw a JL sketch and write it in binary form")
    s.add_argument("--data", required=True)
    s.add_argument("--gamma", type=float, required=True)
    s.add_argument("--delta", type=float, default=0.1)
    s.add_argument("--cjl", type=float, default=DEFAULT_CJL)
    s.add_argument("--family", default="rademacher")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--w", type=int, help="override the computed target dimension")
    s.add_argument("--verify", action="store_true", help="redraw until all pairs verify")
    s.add_argument("--max-attempts", type=int, default=3)
    s.add_argument("--projected", help="also write the projected dataset as CSV")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sketch)

    s = sub.add_parser("recover", help="map a sketched mode back to the original space")
    s.add_argument("--data", required=True)
    s.add_argument("--kernel", required=True)
    s.add_argument("--sketch", required=True)
    s.add_argument("--xtilde", required=True, help="CSV with one row")
    s.add_argument("--mode", choices=["convex", "nonconvex"], default="convex")
    s.add_argument("--eps", type=float, default=0.1)
    s.add_argument("--max-iters", type=int, default=10_000)
    s.add_argument("--out")
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("experiment", help="run the sketch/solve/recover sweep")
    s.add_argument("--config")
    s.add_argument("--data")
    s.add_argument("--kernel")
    s.add_argument("--eps", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--cjl", type=float)
    s.add_argument("--dims", help="'auto' or comma-separated w values")
    s.add_argument("--trials", type=int)
    s.add_argument("--baseline-iters", type=int)
    s.add_argument("--baseline-restarts", type=int)
    s.add_argument("--sketched-iters", type=int)
    s.add_argument("--sketched-restarts", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--method", choices=["meanshift", "brute"])
    s.add_argument("--recovery", choices=["convex", "nonconvex"])
    s.add_argument("--family")
    s.add_argument("--out", help="directory for report.json and trials.csv")
    s.set_defaults(func=cmd_experiment)

    s = sub.add_parser("gadget", help="box-kernel instance from a regular graph")
    s.add_argument("--graph", required=True, help="edge list, 'u v' per line")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--verify", action="store_true")
    s.add_argument("--out")
    s.set_defaults(func=cmd_gadget)

    s = sub.add_parser("kernels", help="kernel diagnostics")
    ks = s.add_subparsers(dest="kernels_command", required=True)
    c = ks.add_parser("check", help="sanity, RDS and derivative checks for one kernel")
    c.add_argument("--kernel", required=True)
    c.add_argument("--grid-max", type=float, default=100.0)
    c.add_argument("--points", type=int, default=10_000)
    c.set_defaults(func=cmd_kernels_check)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except (DomainError, DatasetError, UnsupportedOperation, OSError,
            json.JSONDecodeError, TypeError) as exc:
        print(f"kde-mode: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except KdeModeError as exc:
        print(f"kde-mode: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK if code is None else code

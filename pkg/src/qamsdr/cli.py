"""Command-line front end: simulate, verify, roots, solve, generate."""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys

import numpy as np

from . import detectors as det
from .experiments import (ConfigError, SimConfig, random_roots, records_to_csv, roots_row, simulate,
                          verify_instance)
from .model import complex_to_real, dump_instance, generate_instance, load_instance
from .relaxations import RootSet, build, extract_point
from .sdp import SolverOptions, Status

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3


def _read_json(path):
    try:
        with open(path) as f:
            return json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: line {e.lineno} column {e.colno}: {e.msg}") from e
    except OSError as e:
        raise ConfigError(str(e)) from e


def _emit(text: str, out: str | None):
    if out:
        with open(out, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)


def _solver_opts(args) -> SolverOptions:
    return SolverOptions(gap_tol=args.tol_gap, feas_tol=args.tol_feas, verbose=args.verbose)


def _sim_config(args) -> SimConfig:
    d = _read_json(args.config) if args.config else {}
    if not isinstance(d, dict):
        raise ConfigError("config must be a JSON object")
    overrides = {"seed": args.seed, "randomizations": args.randomizations, "jobs": args.jobs}
    for key in ("gap_tol", "feas_tol"):
        overrides[key] = getattr(args, "tol_" + key.split("_")[0])
    d.update({k: v for k, v in overrides.items() if v is not None})
    return SimConfig.from_dict(d)


def cmd_simulate(args) -> int:
    cfg = _sim_config(args)
    records = simulate(cfg)
    for r in records:
        if r.failures:
            print(f"snr {r.snr_db:g} {r.detector}: {r.failures} solver failures", file=sys.stderr)
    _emit(records_to_csv(records), args.out)
    return EXIT_OK


def _verify_instances(args):
    if args.instance:
        try:
            with open(args.instance) as f:
                yield complex_to_real(load_instance(f.read()))
        except (OSError, ValueError, KeyError) as e:
            raise ConfigError(f"{args.instance}: {e}") from e
        return
    d = _read_json(args.config) if args.config else {}
    known = {"count", "m_tilde", "n_tilde", "q", "snr_db", "seed"}
    if set(d) - known:
        raise ConfigError(f"unknown verify keys: {sorted(set(d) - known)}")
    count, q = int(d.get("count", 5)), int(d.get("q", 2))
    n_list = d.get("n_tilde", [2, 3, 4])
    n_list = n_list if isinstance(n_list, list) else [n_list]
    seed = args.seed if args.seed is not None else int(d.get("seed", 0))
    for k in range(count):
        nt = int(n_list[k % len(n_list)])
        mt = int(d.get("m_tilde", nt))
        ss = np.random.SeedSequence([seed, k])
        yield complex_to_real(generate_instance(mt, nt, q, float(d.get("snr_db", 10.0)), np.random.default_rng(ss)))


def cmd_verify_equivalence(args) -> int:
    opts = _solver_opts(args)
    reports = [verify_instance(inst, opts, args.tol_check) for inst in _verify_instances(args)]
    _emit(json.dumps({"instances": reports}, indent=2) + "\n", args.out)
    if any(s != Status.OPTIMAL.value for r in reports for s in r["statuses"].values()):
        return EXIT_SOLVER
    gaps_ok = all(g <= args.tol_value for r in reports for g in r["gaps"].values())
    conv_ok = all(c["feasible"] and c.get("objective_rel_diff", 1.0) <= args.tol_check
                  for r in reports for c in r["conversions"])
    return EXIT_OK if gaps_ok and conv_ok else EXIT_CHECK_FAILED


def cmd_roots(args) -> int:
    roots = []
    try:
        for text in args.roots or []:
            roots.append(RootSet(tuple(float(v) for v in text.split(","))))
    except ValueError as e:
        raise ConfigError(f"bad roots: {e}") from e
    if args.random:
        roots.extend(random_roots(args.random, args.seed or 0))
    if not roots:
        raise ConfigError("give --roots or --random")
    opts = _solver_opts(args)
    lines = ["r1,r2,r3,r4,p1,p2,p3,p4,p5,condition,L,U,full_interval,agree"]
    try:
        rows = [roots_row(r, opts) for r in roots]
    except RuntimeError as e:
        print(str(e), file=sys.stderr)
        return EXIT_SOLVER
    for row in rows:
        nums = [format(v, ".10g") for v in row["roots"] + row["p"]]
        lines.append(",".join(nums + [str(row["condition"]).lower(), format(row["L"], ".10g"),
                                      format(row["U"], ".10g"), str(row["full_interval"]).lower(),
                                      str(row["agree"]).lower()]))
    _emit("\n".join(lines) + "\n", args.out)
    return EXIT_OK if all(r["agree"] for r in rows) else EXIT_CHECK_FAILED


def cmd_solve(args) -> int:
    try:
        with open(args.instance) as f:
            ci = load_instance(f.read())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{args.instance}: line {e.lineno} column {e.colno}: {e.msg}") from e
    except (OSError, ValueError, KeyError) as e:
        raise ConfigError(f"{args.instance}: {e}") from e
    inst = complex_to_real(ci)
    relax = build(args.relaxation, inst)
    sol = relax.solve(_solver_opts(args))
    point = extract_point(sol, relax)
    if args.rounding == "rand":
        d = det.gaussian_randomized_rounding(point, inst, args.randomizations or 100, seed=args.seed)
    elif args.rounding == "va1":
        if relax.kind != "va":
            raise ConfigError("rounding va1 needs the va relaxation")
        d = det.va_rounding_i(point.aux.b_vec, inst)
    else:
        d = det.simple_rounding(point, inst)
    out = {
        "relaxation": relax.kind, "status": sol.status.value, "relaxation_value": sol.objective,
        "iterations": sol.iterations, "gap": sol.gap, "s_hat": d.s_hat.tolist(),
        "objective": d.objective, "s_true": inst.s_true.tolist(),
    }
    _emit(json.dumps(out, indent=2) + "\n", args.out)
    return EXIT_OK if sol.status is Status.OPTIMAL else EXIT_SOLVER


def cmd_generate(args) -> int:
    snr = math.inf if args.snr_db is None else args.snr_db
    ci = generate_instance(args.m_tilde, args.n_tilde, args.q, snr, args.seed or 0)
    _emit(dump_instance(ci) + "\n", args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int)
    common.add_argument("--out")
    common.add_argument("--tol-gap", type=float, default=1e-8)
    common.add_argument("--tol-feas", type=float, default=1e-8)
    common.add_argument("--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="qamsdr", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="Monte-Carlo SER sweep to CSV")
    s.add_argument("--config")
    s.add_argument("--randomizations", type=int)
    s.add_argument("--jobs", type=int)
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", parents=[common], help="equivalence report for random or given instances")
    v.add_argument("--config")
    v.add_argument("--instance")
    v.add_argument("--tol-value", type=float, default=1e-5, help="allowed relative gap between optimal values")
    v.add_argument("--tol-check", type=float, default=1e-6, help="feasibility / objective tolerance")
    v.set_defaults(func=cmd_verify_equivalence)

    r = sub.add_parser("roots", parents=[common], help="root condition versus the computed interval")
    r.add_argument("--roots", action="append", help="comma-separated quadruple; repeatable")
    r.add_argument("--random", type=int, default=0, help="also analyse this many random quadruples")
    r.set_defaults(func=cmd_roots)

    o = sub.add_parser("solve", parents=[common], help="solve one instance file")
    o.add_argument("instance")
    o.add_argument("--relaxation", default="bc", choices=["bc", "pi", "pi16", "pi64", "va"])
    o.add_argument("--rounding", default="simple", choices=["simple", "va1", "rand"])
    o.add_argument("--randomizations", type=int)
    o.set_defaults(func=cmd_solve)

    g = sub.add_parser("generate", parents=[common], help="write a random instance file")
    g.add_argument("--m-tilde", type=int, default=4)
    g.add_argument("--n-tilde", type=int, default=4)
    g.add_argument("-q", type=int, default=2)
    g.add_argument("--snr-db", type=float, help="omit for a noiseless instance")
    g.set_defaults(func=cmd_generate)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

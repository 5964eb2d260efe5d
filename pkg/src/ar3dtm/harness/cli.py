"""Command line entry point: solve, bench, check and gen."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from ..model import QuarticModel, evaluate
from ..optimality import classify
from .experiments import (
    ROW_FIELDS, SOLVERS, SWEEP_FIELDS, CsvCollector, bench_rows, linear_grid, run_solver, sweep_rows,
)
from .generators import KINDS, GenSpec, generate


def _read_json(path):
    with open(path) as fh:
        return json.load(fh)


def _write_json(data, path):
    text = json.dumps(data, indent=2)
    if path in (None, "-"):
        print(text)
    else:
        with open(path, "w") as fh:
            fh.write(text + "\n")


def _read_point(path, n):
    data = _read_json(path)
    if isinstance(data, dict):
        data = data.get("s", data.get("s_star"))
    point = np.asarray(data, dtype=float).ravel()
    if point.shape != (n,):
        raise ValueError(f"point has {point.size} entries, model has n = {n}")
    return point


def _int_list(text):
    return [int(part) for part in text.split(",") if part]


def cmd_gen(args):
    spec = GenSpec(args.set, args.n, seed=args.seed, trial=args.trial, a=args.a, b=args.b,
                   c=args.c, sigma=args.sigma, rank=args.rank)
    _write_json(generate(spec).to_json(), args.out)
    return 0


def cmd_solve(args):
    m = QuarticModel.from_json(_read_json(args.model))
    rank = args.rank if args.rule == "lowrank" else None
    s, counters, status, elapsed, trace = run_solver(
        m, args.solver, args.tol, args.mode, args.rule, rank, args.max_outer, args.seed)
    value, grad, _ = evaluate(m, s, 1)
    result = {
        "solver": args.solver,
        "status": status,
        "s": s.tolist(),
        "value": value,
        "grad_norm": float(np.linalg.norm(grad)),
        "cpu_ms": 1e3 * elapsed,
        **counters,
        "report": classify(m, s).to_json(),
    }
    if args.solver == "dtm":
        result["trace"] = trace.to_json()
    _write_json(result, args.out)
    return 0 if status == "converged" else 1


def cmd_check(args):
    m = QuarticModel.from_json(_read_json(args.model))
    s = _read_point(args.point, m.n)
    _write_json(classify(m, s, args.tol).to_json(), args.out)
    return 0


def cmd_bench(args):
    failures = []

    def on_status(status):
        if status != "converged":
            failures.append(status)

    solvers = [name for name in args.solver.split(",") if name]
    kwargs = dict(solvers=solvers, tol=args.tol, mode=args.mode, rule=args.rule,
                  rank=args.rank, max_outer=args.max_outer, on_status=on_status)
    if args.sweep:
        if len(args.n) != 1:
            raise ValueError("a sweep takes a single n")
        fields = ROW_FIELDS + SWEEP_FIELDS
        values = linear_grid(args.sweep_from, args.sweep_to, args.steps)
        rows = sweep_rows(args.set, args.n[0], args.trials, args.sweep, values, args.seed, **kwargs)
    else:
        fields = ROW_FIELDS
        rows = bench_rows(args.set, args.n, args.trials, args.seed, **kwargs)

    handle = sys.stdout if args.csv in (None, "-") else open(args.csv, "w", newline="")
    try:
        collector = CsvCollector(handle, fields)
        for row in rows:
            collector.add(row)
    finally:
        if handle is not sys.stdout:
            handle.close()
    if failures:
        logging.getLogger(__name__).warning("%d runs did not converge", len(failures))
        return 1
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="ar3dtm", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a random model as JSON")
    gen.add_argument("--set", choices=KINDS, required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--trial", type=int, default=0)
    gen.add_argument("--rank", type=int, default=1)
    for name in ("a", "b", "c", "sigma"):
        gen.add_argument(f"--{name}", type=float)
    gen.add_argument("--out", default="-")
    gen.set_defaults(func=cmd_gen)

    def solver_options(p):
        p.add_argument("--mode", choices=("practical", "variant1"), default="practical")
        p.add_argument("--rule", choices=("diagonal", "lowrank", "full"))
        p.add_argument("--rank", type=int, default=1)
        p.add_argument("--tol", type=float, default=1e-5)
        p.add_argument("--max-outer", type=int, default=200)
        p.add_argument("--seed", type=int, default=0)

    solve = sub.add_parser("solve", help="minimize a model read from JSON")
    solve.add_argument("--model", required=True)
    solve.add_argument("--solver", choices=SOLVERS, default="dtm")
    solver_options(solve)
    solve.add_argument("--out", default="-")
    solve.set_defaults(func=cmd_solve, rule="diagonal")

    check = sub.add_parser("check", help="optimality report for a point")
    check.add_argument("--model", required=True)
    check.add_argument("--point", required=True)
    check.add_argument("--tol", type=float, default=1e-8)
    check.add_argument("--out", default="-")
    check.set_defaults(func=cmd_check)

    bench = sub.add_parser("bench", help="run a test set and write CSV rows")
    bench.add_argument("--set", choices=KINDS, required=True)
    bench.add_argument("--n", type=_int_list, required=True)
    bench.add_argument("--trials", type=int, default=10)
    bench.add_argument("--solver", default="dtm", help="comma separated: dtm, arc")
    solver_options(bench)
    bench.add_argument("--csv", default="-")
    bench.add_argument("--sweep", choices=("sigma", "c"))
    bench.add_argument("--from", dest="sweep_from", type=float)
    bench.add_argument("--to", dest="sweep_to", type=float)
    bench.add_argument("--steps", type=int, default=6)
    bench.set_defaults(func=cmd_bench)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    if getattr(args, "sweep", None) and (args.sweep_from is None or args.sweep_to is None):
        parser.error("--sweep needs --from and --to")
    if args.command == "bench":
        unknown = set(args.solver.split(",")) - set(SOLVERS) - {""}
        if unknown:
            parser.error(f"unknown solver(s): {', '.join(sorted(unknown))}")
    try:
        return args.func(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

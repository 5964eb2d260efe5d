"""Benchmark runs, parameter sweeps and the dense-versus-diagonal timing."""

from __future__ import annotations

import csv
import time

import numpy as np

from ..arc import ArcConfig, arc_minimize, attainable_tol, model_objective
from ..dtm import DtmConfig, Iterate, build_model, minimize
from ..model import evaluate, gradient_scale
from ..optimality import classify
from .generators import GenSpec, generate

ROW_FIELDS = [
    "solver", "set", "n", "seed", "trial", "iters_success", "iters_total", "fevals", "devals",
    "chol_count", "cpu_ms", "final_value", "grad_norm", "first_order_ok", "local2_ok",
    "necessary_ok", "sufficient_ok", "safeguards",
]
SWEEP_FIELDS = ["sweep_param", "sweep_value"]
SOLVERS = ("dtm", "arc")


def default_rule(kind):
    return "lowrank" if kind == "lowrank" else "diagonal"


def run_solver(m, solver="dtm", tol=1e-5, mode="practical", rule="diagonal", rank=None,
               max_outer=200, seed=0):
    """Solve one model.

    Returns ``(s, counters, status, seconds, trace)``; the time covers the
    solve call only.
    """
    if solver == "dtm":
        cfg = DtmConfig(eps=tol, mode=mode, rule=rule, rank=rank, max_outer=max_outer, seed=seed)
        start = time.perf_counter()
        s, trace, status = minimize(m, cfg)
        elapsed = time.perf_counter() - start
        counters = {
            "iters_success": trace.successful_iters, "iters_total": trace.total_iters,
            "fevals": trace.function_evals, "devals": trace.derivative_evals,
            "chol_count": trace.cholesky_count, "safeguards": trace.safeguards,
        }
        return s, counters, status, elapsed, trace
    if solver == "arc":
        start = time.perf_counter()
        s, trace = arc_minimize(model_objective(m), np.zeros(m.n), ArcConfig(tol=tol))
        elapsed = time.perf_counter() - start
        counters = {
            "iters_success": trace.successful, "iters_total": trace.iterations,
            "fevals": trace.fevals, "devals": trace.devals,
            "chol_count": trace.cholesky_count, "safeguards": 0,
        }
        return s, counters, trace.status, elapsed, trace
    raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")


def result_row(solver, spec, m, s, counters, elapsed, tol):
    """One CSV row: counters, timing and the certificate flags at the returned point."""
    value, grad, _ = evaluate(m, s, 1)
    grad_norm = float(np.linalg.norm(grad))
    report = classify(m, s)
    return {
        "solver": solver, "set": spec.kind, "n": spec.n, "seed": spec.seed, "trial": spec.trial,
        **counters,
        "cpu_ms": 1e3 * elapsed,
        "final_value": value,
        "grad_norm": grad_norm,
        "first_order_ok": grad_norm <= attainable_tol(tol, gradient_scale(m, s)),
        "local2_ok": report.local2_ok,
        "necessary_ok": report.necessary_ok,
        "sufficient_ok": report.sufficient_ok,
    }


def bench_rows(kind, ns, trials, seed=0, solvers=("dtm",), tol=1e-5, mode="practical",
               rule=None, rank=1, max_outer=200, overrides=None, on_status=None):
    """Yield one row per (n, trial, solver); ``overrides`` sets a, b, c or sigma."""
    overrides = overrides or {}
    for n in ns:
        for trial in range(trials):
            spec = GenSpec(kind, n, seed=seed, trial=trial, rank=rank, **overrides)
            m = generate(spec)
            for solver in solvers:
                use_rule = rule or default_rule(kind)
                use_rank = rank if use_rule == "lowrank" else None
                s, counters, status, elapsed, _ = run_solver(
                    m, solver, tol, mode, use_rule, use_rank, max_outer, seed)
                if on_status is not None:
                    on_status(status)
                yield result_row(solver, spec, m, s, counters, elapsed, tol)


def sweep_rows(kind, n, trials, param, values, seed=0, **kwargs):
    """Rows for each value of ``param`` (``sigma`` or ``c``), tagged with the sweep columns."""
    if param not in ("sigma", "c"):
        raise ValueError("sweeps run over sigma or c")
    overrides = dict(kwargs.pop("overrides", None) or {})
    for value in values:
        overrides[param] = float(value)
        for row in bench_rows(kind, [n], trials, seed, overrides=dict(overrides), **kwargs):
            yield {**row, "sweep_param": param, "sweep_value": float(value)}


def pass_fractions(rows, flag="sufficient_ok"):
    """Fraction of rows passing ``flag`` for each sweep value, in sweep order."""
    totals = {}
    for row in rows:
        hits, count = totals.get(row["sweep_value"], (0, 0))
        totals[row["sweep_value"]] = (hits + bool(row[flag]), count + 1)
    return {value: hits / count for value, (hits, count) in totals.items()}


def inversions(fractions, increasing=True):
    """Number of adjacent pairs that break the expected monotone direction."""
    seq = [fractions[k] for k in sorted(fractions)]
    if not increasing:
        seq = [-v for v in seq]
    return sum(1 for lo, hi in zip(seq, seq[1:]) if hi < lo)


def _median_time(fn, repeats):
    times = []
    for _ in range(repeats):
        start = time.perf_counter()
        fn()
        times.append(time.perf_counter() - start)
    return float(np.median(times))


def model_eval_timing(m, repeats=20, seed=0):
    """Per-iteration model cost: dense third-derivative model versus the diagonal rule.

    Both measurements start from the same iterate (one DTM step away from 0,
    so the third derivative includes the quartic term) and cover building the
    model plus one value/gradient/Hessian evaluation of it.
    """
    s0, _, _ = minimize(m, DtmConfig(max_outer=1, seed=seed))
    if not np.any(s0):
        s0 = np.random.default_rng(seed).standard_normal(m.n) / np.sqrt(m.n)
    value, grad, hess = evaluate(m, s0, 2)
    step = -grad / max(np.linalg.norm(grad), 1.0)
    cfg = DtmConfig()

    def one(rule):
        it = Iterate(m, s0, value, grad, hess)
        built = build_model(it, rule, 0.0, cfg)
        evaluate(built.model, step, 2)

    dense = _median_time(lambda: one("full"), repeats)
    diagonal = _median_time(lambda: one("diagonal"), repeats)
    return {"n": m.n, "dense_ms": 1e3 * dense, "diagonal_ms": 1e3 * diagonal, "ratio": dense / diagonal}


def cpu_comparison(n, trials=3, seed=0, tol=1e-3):
    """Full DTM runs with the diagonal rule and with the dense model on identical full instances."""
    rows = []
    for trial in range(trials):
        spec = GenSpec("full", n, seed=seed, trial=trial)
        m = generate(spec)
        for rule in ("diagonal", "full"):
            _, counters, status, elapsed, _ = run_solver(m, "dtm", tol, rule=rule, seed=seed)
            rows.append({"trial": trial, "rule": rule, "status": status, "cpu_ms": 1e3 * elapsed,
                         "ms_per_iter": 1e3 * elapsed / max(counters["iters_total"], 1), **counters})
    return rows


class CsvCollector:
    """Writes rows as they arrive and flushes after each so partial runs survive."""

    def __init__(self, handle, fields):
        self.handle = handle
        self.writer = csv.DictWriter(handle, fieldnames=fields, extrasaction="ignore")
        self.writer.writeheader()
        self.count = 0

    def add(self, row):
        self.writer.writerow(row)
        self.handle.flush()
        self.count += 1


def linear_grid(start, stop, steps):
    if steps < 1:
        raise ValueError("steps must be positive")
    return np.linspace(start, stop, steps) if steps > 1 else np.array([float(start)])


__all__ = [
    "ROW_FIELDS", "SWEEP_FIELDS", "CsvCollector", "bench_rows", "cpu_comparison", "default_rule",
    "inversions", "linear_grid", "model_eval_timing", "pass_fractions", "result_row",
    "run_solver", "sweep_rows",
]

"""Diagonal tensor method: adaptive regularization with a cheap cubic model.

At iterate s_i the exact Taylor expansion of m is

    m(s_i + s) = f_i + g_i's + H_i[s]^2/2 + T_i[s]^3/6 + (sigma/4)||s||_W^4,

with T_i the full third derivative at s_i. Each step replaces T_i by a
diagonal tensor (its clipped diagonal, or an exact diagonal in a basis built
from low-rank factors) and inflates sigma to sigma + d_i. The model is solved
by the secular solver, and d_i adapts by a ratio test.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np

from .arc import ArcConfig, arc_minimize, attainable_tol, model_objective
from .lowrank import RankApproxError, change_of_basis, rank_approx
from .model import QuarticModel, evaluate, gradient_scale, increment, quartic_third_derivative
from .secular import SecularConfig, solve as secular_solve
from .tensor import Metric, SymTensor3

log = logging.getLogger(__name__)

RULES = ("diagonal", "lowrank", "full")
MODES = ("practical", "variant1")


@dataclass(frozen=True)
class DtmConfig:
    eta: float = 0.3
    eta1: float = 3.0
    gamma2: float = 0.5
    gamma: float = 2.0
    alpha: float = 0.1
    cap: float = 1e6
    eps: float = 1e-5
    d0: float = 0.0
    mode: str = "practical"
    rule: str = "diagonal"
    rank: int | None = None
    max_outer: int = 200
    use_exact_factors: bool = True
    keep_subproblems: bool = False
    seed: int = 0
    secular: SecularConfig = field(default_factory=SecularConfig)
    arc: ArcConfig = field(default_factory=ArcConfig)

    def __post_init__(self):
        if not self.eta1 > self.eta > 0:
            raise ValueError("need eta1 > eta > 0")
        if not self.gamma > 1 > self.gamma2 > 0:
            raise ValueError("need gamma > 1 > gamma2 > 0")
        if not 0 < self.alpha < 0.5:
            raise ValueError("alpha must lie in (0, 1/2)")
        if not self.cap > 0 or not self.eps > 0 or self.d0 < 0:
            raise ValueError("cap and eps must be positive and d0 nonnegative")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.rule not in RULES:
            raise ValueError(f"rule must be one of {RULES}")
        if self.rank is not None and self.rank < 1:
            raise ValueError("rank must be positive")


@dataclass
class IterationRecord:
    iteration: int
    d: float
    sigma_d: float
    rho: float
    beta: float
    step_norm: float
    tag: str
    decrease: float
    predicted: float
    grad_norm: float
    rule: str
    solver: str
    tensor_ratio: float


@dataclass
class DtmTrace:
    records: list = field(default_factory=list)
    successful_iters: int = 0
    total_iters: int = 0
    function_evals: int = 0
    derivative_evals: int = 0
    cholesky_count: int = 0
    safeguards: int = 0
    rule_fallbacks: int = 0
    secular_reasons: list = field(default_factory=list)
    secular_results: list = field(default_factory=list)
    subproblems: list = field(default_factory=list)

    @property
    def max_d(self):
        return max((r.d for r in self.records), default=0.0)

    @property
    def lipschitz_estimate(self):
        """Largest observed |T_i[s]^3| / ||s||_W^3 over the steps taken."""
        return max((r.tensor_ratio for r in self.records), default=0.0)

    def d_bound(self, cfg):
        """gamma (B + L)^(3/2) eps^(-1/2) with the empirical third-order constant L."""
        return cfg.gamma * (cfg.cap + self.lipschitz_estimate) ** 1.5 * cfg.eps ** -0.5

    def to_json(self):
        return {
            "records": [asdict(r) for r in self.records],
            "successful_iters": self.successful_iters,
            "total_iters": self.total_iters,
            "function_evals": self.function_evals,
            "derivative_evals": self.derivative_evals,
            "cholesky_count": self.cholesky_count,
            "safeguards": self.safeguards,
            "rule_fallbacks": self.rule_fallbacks,
            "secular_reasons": list(self.secular_reasons),
        }


class Iterate:
    """Derivatives of m at a point, with the third derivative built on demand."""

    def __init__(self, m, s, value, gradient, hessian):
        self.m = m
        self.s = s
        self.value = value
        self.gradient = gradient
        self.hessian = hessian

    @property
    def at_origin(self):
        return not np.any(self.s)

    def tensor_diagonal(self):
        m = self.m
        diag = m.T.diagonal_entries()
        if self.at_origin:
            return diag
        Wd = np.diag(m.W.matrix)
        return diag + 6.0 * m.sigma * m.W.apply(self.s) * Wd

    @cached_property
    def tensor(self):
        if self.at_origin:
            return self.m.T
        extra = quartic_third_derivative(self.m.sigma, self.m.W, self.s)
        return self.m.T.plus_dense(extra)

    def increment(self, v):
        """m(s_i + v) - m(s_i) from the exact Taylor expansion, free of cancellation."""
        norm2 = float(v @ self.m.W.apply(v))
        return float(self.gradient @ v + 0.5 * (v @ self.hessian @ v) + self.tensor_cube(v) / 6.0
                     + 0.25 * self.m.sigma * norm2 ** 2)

    def tensor_cube(self, v):
        """T_i[v]^3 without forming T_i."""
        m = self.m
        cube = m.T.contract(v, 3)
        if self.at_origin:
            return cube
        return cube + 6.0 * m.sigma * float(m.W.apply(self.s) @ v) * float(v @ m.W.apply(v))


@dataclass
class BuiltModel:
    """The regularized diagonal model in its working coordinates."""

    model: QuarticModel
    rule: str
    sigma_d: float
    basis: np.ndarray | None = None
    basis_inv: np.ndarray | None = None
    original: QuarticModel | None = None

    @property
    def diag_t(self):
        return self.model.T.data if self.model.T.kind == "diagonal" else None

    @property
    def W_eff(self):
        return self.model.W

    def to_working(self, s):
        return s if self.basis is None else self.basis @ s

    def to_original(self, s_work):
        return s_work if self.basis is None else self.basis_inv @ s_work

    def value(self, s):
        """Model value at a step s given in original coordinates."""
        return self.model.value(self.to_working(s))

    def original_model(self):
        """The same model written in the original coordinates."""
        return self.model if self.original is None else self.original

    def objective(self):
        """The model as a function of the step in original coordinates."""
        return model_objective(self.original_model())


def _diagonal_model(it, sigma_d, cfg):
    t = np.clip(it.tensor_diagonal(), -cfg.cap, cfg.cap)
    m = it.m
    model = QuarticModel(it.value, it.gradient, it.hessian, SymTensor3.diagonal(t), sigma_d, m.W)
    return BuiltModel(model, "diagonal", sigma_d)


def build_model(it, rule, d, cfg, rng=None):
    """Build the step model at iterate ``it`` with extra regularization ``d``.

    Falls back to the diagonal rule (and logs it) when a low-rank basis
    cannot be formed.
    """
    if d < 0:
        raise ValueError("d must be nonnegative")
    m = it.m
    sigma_d = m.sigma + d
    if rule == "diagonal":
        return _diagonal_model(it, sigma_d, cfg)
    if rule == "full":
        model = QuarticModel(it.value, it.gradient, it.hessian, it.tensor, sigma_d, m.W)
        return BuiltModel(model, "full", sigma_d)

    P = cfg.rank or (m.T.rank if m.T.kind == "lowrank" else None)
    if P is None:
        raise ValueError("the low-rank rule needs a rank")
    try:
        if it.at_origin and cfg.use_exact_factors and m.T.kind == "lowrank" and m.T.rank == P:
            factors = m.T.factors
        else:
            factors = rank_approx(it.tensor, P, rng if rng is not None else cfg.seed)
        C, C_inv = change_of_basis(factors)
        if not np.all(np.isfinite(C_inv)) or np.linalg.cond(C) > 1e12:
            raise np.linalg.LinAlgError("change of basis is too ill-conditioned")
    except (RankApproxError, np.linalg.LinAlgError) as exc:
        log.info("low-rank rule unavailable (%s); using the diagonal rule", exc)
        built = _diagonal_model(it, sigma_d, cfg)
        built.rule = "diagonal_fallback"
        return built
    g_t = C_inv.T @ it.gradient
    H_t = C_inv.T @ it.hessian @ C_inv
    W_t = C_inv.T @ m.W.matrix @ C_inv
    t = np.zeros(m.n)
    t[:P] = 1.0
    model = QuarticModel(it.value, g_t, 0.5 * (H_t + H_t.T), SymTensor3.diagonal(t),
                         sigma_d, Metric(0.5 * (W_t + W_t.T)))
    # cubic term sum_k (a_k^T s)^3, built from the unrotated derivatives
    original = QuarticModel(it.value, it.gradient, it.hessian, SymTensor3.lowrank(factors), sigma_d, m.W)
    return BuiltModel(model, "lowrank", sigma_d, C, C_inv, original)


def _solve_step(built, it, cfg, trace):
    """Minimize the built model; secular first, then the ARC safeguards."""
    work = built.model
    res = secular_solve(work.H, work.g, work.T, work.sigma, work.W, cfg.secular)
    trace.cholesky_count += res.cholesky_count
    trace.secular_results.append(res)
    if cfg.keep_subproblems:
        trace.subproblems.append((work, res))
    if res.converged:
        return built.to_original(res.s), "secular"
    trace.safeguards += 1
    trace.secular_reasons.append(res.reason)
    # warm start from the secular iterate only when it improves on the zero step
    start = built.to_original(res.s)
    if not (np.all(np.isfinite(start)) and increment(work, res.s) < 0):
        start = np.zeros(work.n)
    arc_cfg = cfg.arc
    x, arc_trace = arc_minimize(built.objective(), start, arc_cfg)
    trace.cholesky_count += arc_trace.cholesky_count
    if arc_trace.converged:
        return x, "arc_model"
    x, arc_trace = arc_minimize(model_objective(it.m), it.s, arc_cfg)
    trace.cholesky_count += arc_trace.cholesky_count
    return x - it.s, "arc_direct"


def _variant1_success(rho, beta, sigma_d, step_norm, cfg):
    if rho < cfg.eta:
        return False
    if beta >= cfg.alpha:
        return True
    upper = (2.0 / 3.0) * (-beta + cfg.alpha) / step_norm
    if beta <= -4.0 * cfg.alpha:
        lower = (1.0 / 6.0) * (-beta + cfg.alpha) / step_norm
        return not lower <= sigma_d <= upper
    return sigma_d >= upper


def minimize(m, cfg=None, x0=None):
    """Minimize m with the diagonal tensor method.

    Returns ``(s, trace, status)`` where status is ``converged`` when
    ||grad m(s)|| <= cfg.eps (or the rounding floor of the gradient, when
    that is larger) and ``max_iterations`` otherwise. Function
    evaluations count trial values; derivative evaluations count gradients
    at trial points. The derivatives at the starting point are inputs.
    """
    cfg = cfg or DtmConfig()
    rng = np.random.default_rng(cfg.seed)
    trace = DtmTrace()
    s = np.zeros(m.n) if x0 is None else np.asarray(x0, dtype=float).copy()
    value, grad, hess = evaluate(m, s, 2)
    it = Iterate(m, s, value, grad, hess)
    d = cfg.d0
    status = "max_iterations"

    def stationary(point, g):
        return np.linalg.norm(g) <= attainable_tol(cfg.eps, gradient_scale(m, point))

    for k in range(cfg.max_outer):
        if stationary(it.s, it.gradient):
            status = "converged"
            break
        trace.total_iters += 1
        built = build_model(it, cfg.rule, d, cfg, rng)
        if built.rule == "diagonal_fallback":
            trace.rule_fallbacks += 1
        step, solver = _solve_step(built, it, cfg, trace)
        trial = it.s + step
        f_trial, g_trial, _ = evaluate(m, trial, 1)
        trace.function_evals += 1
        trace.derivative_evals += 1
        g_norm = float(np.linalg.norm(g_trial))

        work_step = built.to_working(step)
        predicted = -increment(built.model, work_step)
        actual = -it.increment(step)
        scale = abs(it.gradient @ step) + abs(step @ it.hessian @ step) + abs(predicted)
        rho = actual / predicted if predicted > 1e-13 * scale else float("nan")
        step_norm = m.W.norm(step)
        beta = built.model.T.contract(work_step, 3) / step_norm ** 3 if step_norm > 0 else 0.0
        ratio = abs(it.tensor_cube(step)) / step_norm ** 3 if step_norm > 0 else 0.0

        terminal = stationary(trial, g_trial) and actual >= -1e-13 * scale
        if terminal:
            tag = "very_successful" if rho >= cfg.eta1 else "successful"
        elif math.isnan(rho):
            tag = "unsuccessful"
        elif cfg.mode == "practical":
            if rho >= cfg.eta1:
                tag = "very_successful"
            elif rho >= cfg.eta:
                tag = "successful"
            else:
                tag = "unsuccessful"
        else:
            ok = _variant1_success(rho, beta, built.sigma_d, step_norm, cfg)
            tag = "successful" if ok else "unsuccessful"

        accepted = tag != "unsuccessful"
        trace.records.append(IterationRecord(
            iteration=k, d=d, sigma_d=built.sigma_d, rho=rho, beta=beta,
            step_norm=step_norm, tag=tag, decrease=actual if accepted else 0.0,
            predicted=predicted, grad_norm=g_norm, rule=built.rule, solver=solver,
            tensor_ratio=ratio,
        ))
        if accepted:
            trace.successful_iters += 1
            _, _, hess_trial = evaluate(m, trial, 2)
            it = Iterate(m, trial, f_trial, g_trial, hess_trial)
            if terminal:
                status = "converged"
                break
            if cfg.mode == "variant1" or tag == "very_successful":
                d = cfg.gamma2 * d
        else:
            d = cfg.gamma * max(1.0, d)
    else:
        if stationary(it.s, it.gradient):
            status = "converged"
    return it.s, trace, status

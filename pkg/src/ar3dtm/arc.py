"""Adaptive cubic regularization, used as a safeguard and as a baseline."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import evaluate, gradient_scale
from .secular import SecularConfig, solve as secular_solve
from .tensor import _as_vector


@dataclass(frozen=True)
class ArcConfig:
    sigma0: float = 1.0
    increase: float = 2.0
    decrease: float = 0.5
    eta_accept: float = 0.1
    eta_very: float = 0.9
    tol: float = 1e-8
    max_iter: int = 500
    sigma_min: float = 1e-10
    curvature_tol: float = 1e-8
    rounding_factor: float = 64.0

    def __post_init__(self):
        if not (self.increase > 1 > self.decrease > 0):
            raise ValueError("increase and decrease factors must straddle 1")
        if not (0 < self.eta_accept <= self.eta_very < 1):
            raise ValueError("acceptance thresholds must lie in (0, 1)")
        if not self.sigma0 > 0:
            raise ValueError("sigma0 must be positive")


@dataclass
class ArcTrace:
    iterations: int = 0
    successful: int = 0
    fevals: int = 0
    devals: int = 0
    cholesky_count: int = 0
    status: str = "running"
    values: list = field(default_factory=list)
    sigmas: list = field(default_factory=list)

    @property
    def converged(self):
        return self.status == "converged"


def model_objective(m):
    """Wrap a QuarticModel as an ``objective(x, upto)`` provider."""

    def objective(x, upto):
        return evaluate(m, x, upto)

    objective.gradient_scale = lambda x: gradient_scale(m, x)
    return objective


def attainable_tol(tol, scale, factor=64.0):
    """``tol`` raised to the rounding floor of a gradient whose terms sum to ``scale``."""
    return max(tol, factor * np.finfo(float).eps * scale)


def cubic_step(g, H, sigma_c, secular_cfg=None):
    """Approximate minimizer of g's + H[s]^2/2 + (sigma_c/3)||s||^3.

    Returns ``(s, cholesky_count)``. Falls back to a negative-curvature or
    Cauchy step when the secular solve cannot be used.
    """
    n = g.shape[0]
    cfg = secular_cfg or SecularConfig(check_local_min=False)
    result = secular_solve(H, g, None, sigma_c, None, cfg, power=1)
    if result.converged and np.any(result.s):
        return result.s, result.cholesky_count
    eigvals, eigvecs = np.linalg.eigh(H)
    if eigvals[0] < 0:
        u = eigvecs[:, 0]
        if u @ g > 0:
            u = -u
        # minimizer of the model along u ignoring the linear term
        return (-eigvals[0] / sigma_c) * u, result.cholesky_count
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0:
        return np.zeros(n), result.cholesky_count
    curv = g @ H @ g
    # positive root of -|g|^2 + t g'Hg + sigma t^2 |g|^3 = 0
    a = sigma_c * gnorm ** 3
    t = (-curv + np.sqrt(curv ** 2 + 4.0 * a * gnorm ** 2)) / (2.0 * a)
    return -t * g, result.cholesky_count


def arc_minimize(objective, x0, cfg=None):
    """Minimize ``objective`` with adaptive cubic regularization.

    ``objective(x, upto)`` must return ``(value, gradient, hessian)`` with
    the unused entries allowed to be None. Stops when the gradient norm is
    at most ``cfg.tol`` and the Hessian has no eigenvalue below
    ``-cfg.curvature_tol * (1 + ||H||_F)``. When the objective carries a
    ``gradient_scale(x)`` attribute, the gradient tolerance is never set
    below the rounding floor it implies.
    """
    cfg = cfg or ArcConfig()
    x = _as_vector(x0, name="x0").copy()
    trace = ArcTrace()
    f, g, H = objective(x, 2)
    trace.devals += 1
    trace.values.append(f)
    sigma = cfg.sigma0
    scale_of = getattr(objective, "gradient_scale", None)

    def small(x, g):
        tol = cfg.tol
        if scale_of is not None:
            tol = attainable_tol(tol, scale_of(x), cfg.rounding_factor)
        return np.linalg.norm(g) <= tol

    for _ in range(cfg.max_iter):
        if small(x, g):
            if np.linalg.eigvalsh(H)[0] >= -cfg.curvature_tol * (1.0 + np.linalg.norm(H)):
                trace.status = "converged"
                return x, trace
        trace.iterations += 1
        trace.sigmas.append(sigma)
        s, chol = cubic_step(g, H, sigma)
        trace.cholesky_count += chol
        snorm = np.linalg.norm(s)
        predicted = -(g @ s + 0.5 * s @ H @ s + sigma / 3.0 * snorm ** 3)
        if not predicted > 0 or snorm == 0.0:
            sigma *= cfg.increase
            continue
        if predicted <= 16.0 * np.finfo(float).eps * (1.0 + abs(f)):
            # value differences are rounding noise here; judge the step by the gradient
            f_trial, g_trial, _ = objective(x + s, 1)
            trace.fevals += 1
            trace.devals += 1
            rho = 1.0 if np.linalg.norm(g_trial) < np.linalg.norm(g) else 0.0
        else:
            f_trial = objective(x + s, 0)[0]
            trace.fevals += 1
            rho = (f - f_trial) / predicted
        if rho >= cfg.eta_accept:
            x = x + s
            f, g, H = objective(x, 2)
            trace.devals += 1
            trace.successful += 1
            trace.values.append(f)
            if rho >= cfg.eta_very:
                sigma = max(cfg.decrease * sigma, cfg.sigma_min)
        else:
            sigma *= cfg.increase
    if small(x, g):
        trace.status = "converged"
    else:
        trace.status = "max_iterations"
    return x, trace

"""Optimality operators, global certificates and regularization thresholds."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import evaluate, sqr_operators
from .tensor import Metric, _as_vector, lambda_w, pencil_min_eig


def operators(m, s):
    """B(s) = H + T[s]/2 + sigma||s||_W^2 W and G(s) = H + T[s] + sigma||s||_W^2 W."""
    s = _as_vector(s, m.n, "s")
    Ts = m.T.contract(s, 1)
    reg = m.sigma * m.W.norm(s) ** 2 * m.W.matrix
    return m.H + 0.5 * Ts + reg, m.H + Ts + reg


def _min_eig(A):
    return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])


@dataclass
class OptimalityReport:
    first_order_residual: float
    local2_min_eig: float
    necessary_min_eig: float
    sufficient_min_eig: float
    lambda_w_used: float
    tolerance: float
    first_order_ok: bool
    local2_ok: bool
    necessary_ok: bool
    sufficient_ok: bool

    @property
    def verdict(self):
        if self.sufficient_ok:
            return "global"
        if self.necessary_ok:
            return "undetermined"
        return "not_global"

    def to_json(self):
        data = asdict(self)
        data["verdict"] = self.verdict
        return data


def _tolerance_scale(H):
    return 1.0 + float(np.linalg.norm(H))


def classify(m, s, tol=1e-8):
    """Check first-order, local second-order and both global conditions at s.

    A margin passes when it is at least ``-tol * (1 + ||H||_F)``; the
    first-order residual passes when it is at most the same quantity.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    s = _as_vector(s, m.n, "s")
    _, grad, hess = evaluate(m, s, 2)
    lam = lambda_w(m.T, m.W)
    norm_w = m.W.norm(s)
    Wm = m.W.matrix
    core = m.H + (2.0 / 3.0) * m.T.contract(s, 1) + m.sigma * norm_w ** 2 * Wm
    necessary = core + (lam / 3.0) * norm_w * Wm
    sufficient = core - (lam / 3.0) * norm_w * Wm - lam ** 2 / (18.0 * m.sigma) * Wm
    threshold = tol * _tolerance_scale(m.H)
    residual = float(np.linalg.norm(grad))
    local2 = _min_eig(hess)
    nec = _min_eig(necessary)
    suf = _min_eig(sufficient)
    return OptimalityReport(
        first_order_residual=residual,
        local2_min_eig=local2,
        necessary_min_eig=nec,
        sufficient_min_eig=suf,
        lambda_w_used=lam,
        tolerance=tol,
        first_order_ok=residual <= threshold,
        local2_ok=local2 >= -threshold,
        necessary_ok=nec >= -threshold,
        sufficient_ok=suf >= -threshold,
    )


def offdiag_l1(H):
    """Sum of absolute off-diagonal entries."""
    H = np.asarray(H, dtype=float)
    return float(np.abs(H).sum() - np.abs(np.diag(H)).sum())


def classify_sqr(m, s, tol=1e-8):
    """Certificates for the separable model.

    Sufficient: G_hat(s) is PSD. Necessary: G_hat(s) + 2||H_0||_1 I is PSD,
    where H_0 holds the off-diagonal part of H.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    s = _as_vector(s, m.n, "s")
    grad = m.gradient(s)
    hess = m.hessian(s)
    _, G = sqr_operators(m, s)
    suf = _min_eig(G)
    nec = suf + 2.0 * offdiag_l1(m.H)
    threshold = tol * _tolerance_scale(m.H)
    residual = float(np.linalg.norm(grad))
    local2 = _min_eig(hess)
    return OptimalityReport(
        first_order_residual=residual,
        local2_min_eig=local2,
        necessary_min_eig=nec,
        sufficient_min_eig=suf,
        lambda_w_used=float("nan"),
        tolerance=tol,
        first_order_ok=residual <= threshold,
        local2_ok=local2 >= -threshold,
        necessary_ok=nec >= -threshold,
        sufficient_ok=suf >= -threshold,
    )


# -- sigma thresholds ---------------------------------------------------------


def equivalence_sigma(m, s):
    """Weight above which the necessary and sufficient conditions agree at s."""
    s = _as_vector(s, m.n, "s")
    norm_w = m.W.norm(s)
    if norm_w == 0.0:
        raise ValueError("threshold is undefined at s = 0")
    lam = lambda_w(m.T, m.W)
    curvature = -_min_eig(m.H) / (norm_w ** 2 * m.W.lambda_min)
    return 3.0 * max(curvature, (7.0 / 3.0) * lam / norm_w)


def convexify_outside_sigma(m, s0):
    """Weight making m convex on {||s||_W >= s0}."""
    if not s0 > 0:
        raise ValueError("s0 must be positive")
    lam = lambda_w(m.T, m.W)
    curvature = -_min_eig(m.H) / m.W.lambda_min
    return 2.0 * max(curvature * max(s0 ** -2, 1.0), lam * max(1.0 / s0, 1.0))


def local_convexity_margin(m):
    """Smallest eigenvalue of the pencil (H, W); positive when H is definite."""
    return pencil_min_eig(m.H, m.W)


def convexify_locally_convex_sigma(m):
    """Weight Lambda_W^2 / (4 delta) above which m is convex everywhere."""
    delta = local_convexity_margin(m)
    if delta <= 0:
        raise ValueError("H must be positive definite for this bound")
    return 0.25 * lambda_w(m.T, m.W) ** 2 / delta


def eps_t_sigma(m, eps_t):
    """Weight above which the tensor term stays within eps_t of the gap."""
    if not 0 < eps_t < 1:
        raise ValueError("eps_t must lie in (0, 1)")
    lam = lambda_w(m.T, m.W)
    curvature = max(0.0, -_min_eig(m.H)) / m.W.lambda_min
    return max((3.0 * curvature) ** 3 * eps_t ** -2, (7.0 * lam) ** 1.5 * eps_t ** -0.5)


def sos_sigma(m):
    """The sum-of-squares convexity bound 8 Lambda^2 / delta with unit radius."""
    delta = _min_eig(m.H)
    if delta <= 0:
        raise ValueError("H must be positive definite for this bound")
    lam3 = lambda_w(m.T, Metric.identity(m.n))
    return 8.0 * lam3 ** 2 / delta


@dataclass
class SigmaThresholds:
    equivalence_at_s: float | None
    convexify_outside: float | None
    convexify_locally_convex: float | None
    eps_t_bound: float | None
    sos_bound: float | None

    def to_json(self):
        return asdict(self)


def sigma_thresholds(m, s=None, s0=None, eps_t=None):
    """Collect every applicable threshold; inapplicable ones are None."""
    equivalence = None
    if s is not None and np.any(np.asarray(s, dtype=float)):
        equivalence = equivalence_sigma(m, s)
    outside = convexify_outside_sigma(m, s0) if s0 is not None else None
    local = sos = None
    if local_convexity_margin(m) > 0:
        local = convexify_locally_convex_sigma(m)
    if _min_eig(m.H) > 0:
        sos = sos_sigma(m)
    eps_bound = eps_t_sigma(m, eps_t) if eps_t is not None else None
    return SigmaThresholds(equivalence, outside, local, eps_bound, sos)


__all__ = [
    "OptimalityReport",
    "SigmaThresholds",
    "classify",
    "classify_sqr",
    "convexify_locally_convex_sigma",
    "convexify_outside_sigma",
    "eps_t_sigma",
    "equivalence_sigma",
    "offdiag_l1",
    "operators",
    "sigma_thresholds",
    "sos_sigma",
]

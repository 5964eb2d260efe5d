"""Newton root-finding on the secular equation of the regularized subproblem.

For a fixed matrix Gamma the stationarity system

    (H + Gamma/2 + lam W) s = -g,    lam = sigma ||s||_W^q

reduces to the scalar equation phi(lam) = 1/||s(lam)||_W - (sigma/lam)^(1/q) = 0,
which is solved by safeguarded Newton steps using one Cholesky factorization
per step. The outer loop refreshes Gamma = T[s] until the full residual
vanishes. q = 2 gives the quartic model; q = 1 the cubic (ARC) model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .tensor import Metric, SymTensor3, _as_vector, generalized_eig

CONVERGED = "converged"
SAFEGUARD = "safeguard_needed"


class CholeskyFailure(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class SecularConfig:
    eps_l: float = 1e-7
    eps_kappa: float = 1e-8
    l_max: int = 100
    kappa_max: int = 50
    lambda_offset: float = 1e-8
    check_local_min: bool = True
    polish_below: float = 1e-3
    stall_loops: int = 10

    def __post_init__(self):
        if not self.eps_l > self.eps_kappa > 0:
            raise ValueError("need eps_l > eps_kappa > 0")
        if self.l_max < 1 or self.kappa_max < 1:
            raise ValueError("iteration caps must be positive")
        if not self.lambda_offset > 0:
            raise ValueError("lambda_offset must be positive")


@dataclass
class SecularResult:
    s: np.ndarray
    lam: float
    status: str
    reason: str | None = None
    cholesky_count: int = 0
    newton_steps: int = 0
    outer_loops: int = 0
    residual: float = float("nan")

    @property
    def converged(self):
        return self.status == CONVERGED

    def to_json(self):
        return {
            "s": self.s.tolist(),
            "lambda": self.lam,
            "status": self.status,
            "reason": self.reason,
            "cholesky_count": self.cholesky_count,
            "newton_steps": self.newton_steps,
            "outer_loops": self.outer_loops,
            "residual": self.residual,
        }


def _factor(A):
    try:
        return sla.cholesky(A, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise CholeskyFailure(str(exc)) from exc


def _newton_pieces(A, g, W, sigma, lam, power):
    L = _factor(A + lam * W.matrix)
    s = -sla.cho_solve((L, True), g, check_finite=False)
    norm_w = W.norm(s)
    omega = sla.solve_triangular(L, W.apply(s), lower=True, check_finite=False)
    inv_radius = (sigma / lam) ** (1.0 / power)
    phi = 1.0 / norm_w - inv_radius
    slope = (omega @ omega) / norm_w ** 3 + inv_radius / (power * lam)
    return -phi / slope, s, omega, phi


def _eigen_guess(eig, g, sigma, floor, power):
    """Root of the secular equation written in the eigenbasis of the pencil.

    With g_hat = U'g, ||s(lam)||_W^2 = sum g_hat_i^2 / (D_i + lam)^2, so the
    root costs no factorization. It seeds the Cholesky-based Newton loop.
    """
    g_hat2 = (eig.U.T @ g) ** 2

    def phi(lam):
        norm_w = np.sqrt(np.sum(g_hat2 / (eig.D + lam) ** 2))
        return 1.0 / norm_w - (sigma / lam) ** (1.0 / power)

    if not phi(floor) < 0:
        return floor
    hi = max(2.0 * floor, 1.0)
    while phi(hi) < 0:
        hi *= 4.0
        if hi > 1e300:
            return floor
    return brentq(phi, floor, hi, xtol=1e-15 * hi, rtol=4 * np.finfo(float).eps)


def _accept(cfg, residual, residual_true, lam, lam_true):
    return (
        residual <= cfg.eps_kappa
        and residual_true <= cfg.eps_kappa
        and abs(lam - lam_true) <= 1e-6 * max(1.0, lam)
    )


def _polish(H, g, T, sigma, W, s, tol, result, max_steps=8):
    """Newton steps on the full stationarity system from a nearby fixed point.

    Accepted only if the residual falls to ``tol`` and
    H + T[s]/2 + sigma||s||_W^2 W stays positive definite, so the polished
    point solves the same secular system. Returns None otherwise.
    """
    Wm = W.matrix
    for _ in range(max_steps + 1):
        Ws = W.apply(s)
        lam = sigma * float(s @ Ws)
        gamma = T.contract(s, 1)
        grad = g + H @ s + 0.5 * (gamma @ s) + lam * Ws
        residual = float(np.linalg.norm(grad))
        if residual <= tol:
            break
        hess = H + gamma + lam * Wm + 2.0 * sigma * np.outer(Ws, Ws)
        result.cholesky_count += 1
        try:
            L = _factor(hess)
        except CholeskyFailure:
            return None
        result.newton_steps += 1
        s = s - sla.cho_solve((L, True), grad, check_finite=False)
    else:
        return None
    result.cholesky_count += 1
    try:
        _factor(H + 0.5 * gamma + lam * Wm)
    except CholeskyFailure:
        return None
    return s, gamma, lam, residual


def newton_update(H_eff, g, W, sigma, lam, power=2):
    """One Newton correction of lam for the secular equation.

    Returns ``(delta_lambda, s_of_lambda, omega)`` where s solves
    (H_eff + lam W) s = -g and omega = L^{-1} W s for the Cholesky factor L.
    Raises CholeskyFailure when H_eff + lam W is not positive definite.
    """
    g = _as_vector(g, name="g")
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not np.any(g):
        raise ValueError("g must be nonzero")
    if not isinstance(W, Metric):
        W = Metric(W)
    delta, s, omega, _ = _newton_pieces(np.asarray(H_eff, dtype=float), g, W, sigma, lam, power)
    return delta, s, omega


def solve(H, g, T=None, sigma=1.0, W=None, cfg=None, power=2):
    """Find a stationary point of the regularized model with B(s) positive semidefinite.

    Never raises for numerical trouble; failures come back with status
    ``safeguard_needed`` and a reason string.
    """
    cfg = cfg or SecularConfig()
    g = _as_vector(g, name="g")
    n = g.shape[0]
    H = np.asarray(H, dtype=float).reshape(n, n)
    T = T if T is not None else SymTensor3.zero(n)
    W = W if W is not None else Metric.identity(n)
    if not isinstance(W, Metric):
        W = Metric(W)
    if not sigma > 0:
        raise ValueError("sigma must be positive")

    result = SecularResult(np.zeros(n), 0.0, SAFEGUARD)
    gnorm = float(np.linalg.norm(g))

    def give_up(reason):
        result.status = SAFEGUARD
        result.reason = reason
        return result

    if gnorm < 1e2 * cfg.eps_kappa:
        eig0 = generalized_eig(H, W)
        if eig0.D[0] < 0:
            return give_up("degenerate_g")
        if gnorm == 0.0:
            result.status = CONVERGED
            result.residual = 0.0
            return result

    s = np.zeros(n)
    gamma = np.zeros((n, n))
    lam = 0.0
    Wm = W.matrix
    best_true = np.inf
    best_loop = 0
    for kappa in range(cfg.kappa_max):
        result.outer_loops += 1
        A = H + 0.5 * gamma
        eig = generalized_eig(A, W)
        lam_psd = max(0.0, -eig.D[0])
        margin = cfg.lambda_offset * max(1.0, float(np.abs(eig.D).max()))
        if eig.D[0] < 0:
            u1 = eig.U[:, 0]
            if abs(u1 @ g) < 1e-10 * gnorm * np.linalg.norm(u1):
                return give_up("hard_case")
        floor = lam_psd + margin
        lam = max(_eigen_guess(eig, g, sigma, floor, power), floor)
        # after the first pass at least one Newton step keeps lam in step with the new Gamma
        force_step = kappa > 0
        for _ in range(cfg.l_max):
            try:
                delta, s_lam, _, phi = _newton_pieces(A, g, W, sigma, lam, power)
            except CholeskyFailure:
                result.cholesky_count += 1
                return give_up("cholesky_failure")
            result.cholesky_count += 1
            s = s_lam
            if abs(phi) < cfg.eps_l and not force_step:
                break
            force_step = False
            result.newton_steps += 1
            trial = max(lam + delta, 0.5 * max(lam, cfg.lambda_offset))
            if trial < floor:
                trial = max(0.5 * (lam + lam_psd), floor)
            if trial == lam:
                break
            lam = trial
        else:
            result.s = s
            result.lam = lam
            return give_up("inner_iteration_cap")

        gamma = T.contract(s, 1)
        Ws = W.apply(s)
        base = H @ s + 0.5 * (gamma @ s) + g
        residual = float(np.linalg.norm(base + lam * Ws))
        lam_true = sigma * W.norm(s) ** power
        residual_true = float(np.linalg.norm(base + lam_true * Ws))
        result.s = s
        result.lam = lam
        result.residual = residual
        if _accept(cfg, residual, residual_true, lam, lam_true):
            break
        if residual_true < 0.9 * best_true:
            best_true, best_loop = residual_true, kappa
        elif kappa - best_loop >= cfg.stall_loops:
            return give_up("stalled")
        if power == 2 and residual_true <= cfg.polish_below * max(1.0, gnorm):
            polished = _polish(H, g, T, sigma, W, s, cfg.eps_kappa, result)
            if polished is not None:
                s, gamma, lam, residual = polished
                result.s, result.lam, result.residual = s, lam, residual
                Ws = W.apply(s)
                break
    else:
        return give_up("outer_iteration_cap")

    if cfg.check_local_min and power == 2:
        norm2 = W.norm(s) ** 2
        hess = H + gamma + sigma * (norm2 * Wm + 2.0 * np.outer(Ws, Ws))
        floor_eig = -1e-8 * (1.0 + np.linalg.norm(H))
        if np.linalg.eigvalsh(0.5 * (hess + hess.T))[0] < floor_eig:
            return give_up("saddle_point")
    result.status = CONVERGED
    return result

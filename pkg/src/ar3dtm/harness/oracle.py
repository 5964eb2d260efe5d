"""Brute-force global minimization for tiny models, used to check certificates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..model import evaluate, evaluate_batch

MAX_DIM = 3
DEFAULT_GRID = {1: 4001, 2: 401, 3: 61}


@dataclass
class OracleResult:
    s_star: np.ndarray
    value: float
    method: str
    radius: float

    def to_json(self):
        return {"s_star": self.s_star.tolist(), "value": self.value,
                "method": self.method, "radius": self.radius}


def coercivity_radius(m):
    """Radius beyond which m(s) > m(0), so every global minimizer lies inside.

    Bounds each term by its worst case on ||s|| = r and returns the largest
    real root of sigma lmin(W)^2 r^4 / 4 - ||T||_F r^3 / 6 - ||H||_2 r^2 / 2 - ||g|| r.
    """
    quartic = 0.25 * m.sigma * m.W.lambda_min ** 2
    coeffs = [quartic, -m.T.frobenius() / 6.0, -0.5 * np.linalg.norm(m.H, 2), -np.linalg.norm(m.g)]
    roots = np.roots(coeffs)
    real = roots[np.abs(roots.imag) <= 1e-9 * (1.0 + np.abs(roots))].real
    return float(max(real.max(initial=0.0), 0.0)) * 1.01 + 1e-12


def _grid_values(m, radius, grid, chunk=200_000):
    axis = np.linspace(-radius, radius, grid)
    mesh = np.stack(np.meshgrid(*([axis] * m.n), indexing="ij"), axis=-1).reshape(-1, m.n)
    values = np.concatenate([evaluate_batch(m, mesh[i:i + chunk]) for i in range(0, len(mesh), chunk)])
    return mesh, values


def _refine(m, start):
    out = minimize(
        lambda x: evaluate(m, x, 0)[0], start, method="trust-exact",
        jac=lambda x: evaluate(m, x, 1)[1], hess=lambda x: evaluate(m, x, 2)[2],
        options={"gtol": 1e-12, "maxiter": 200},
    )
    return out.x, evaluate(m, out.x, 0)[0]


def brute_force_min(m, radius=None, grid=None, refinements=10):
    """Global minimizer of a model with n <= 3 by grid search plus Newton refinement.

    The grid covers [-radius, radius]^n; the best ``refinements`` grid points
    seed trust-region Newton runs. If the winner lies near the boundary the
    radius doubles and the search repeats.
    """
    if m.n > MAX_DIM:
        raise ValueError(f"brute force is limited to n <= {MAX_DIM}")
    grid = grid or DEFAULT_GRID[m.n]
    radius = coercivity_radius(m) if radius is None else float(radius)
    if not radius > 0:
        radius = 1.0
    for _ in range(30):
        mesh, values = _grid_values(m, radius, grid)
        order = np.argsort(values)[:refinements]
        candidates = [(float(m.f0), np.zeros(m.n))]
        for idx in order:
            x, val = _refine(m, mesh[idx])
            candidates.append((val, x))
        value, s_star = min(candidates, key=lambda item: item[0])
        if np.max(np.abs(s_star)) < 0.95 * radius:
            break
        radius *= 2.0
    method = f"grid{grid}^{m.n}+trust-exact x{refinements}"
    return OracleResult(np.asarray(s_star, dtype=float), float(value), method, radius)

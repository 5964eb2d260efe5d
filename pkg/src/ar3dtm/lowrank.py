"""Symmetric rank-P approximation of third-order tensors and the change of basis."""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla
from scipy.optimize import minimize

from .tensor import SymTensor3


class RankApproxError(RuntimeError):
    pass


def _reconstruct(factors, n):
    if len(factors) == 0:
        return np.zeros((n, n, n))
    return np.einsum("ki,kj,kl->ijl", factors, factors, factors)


def reconstruction_residual(T, factors):
    """Frobenius norm of T minus the sum of the factor cubes."""
    dense = T.to_dense() if isinstance(T, SymTensor3) else np.asarray(T)
    factors = np.atleast_2d(np.asarray(factors, dtype=float)).reshape(-1, dense.shape[0])
    return float(np.linalg.norm((dense - _reconstruct(factors, dense.shape[0])).ravel()))


def _signed_factor(weight, direction):
    # weight * u(x)u(x)u == (cbrt(weight) u) cubed, for either sign of weight
    return np.cbrt(weight) * direction


def best_rank_one(dense, rng, restarts=50, tol=1e-10, max_iter=1000):
    """Leading symmetric rank-one term by the shifted symmetric power method.

    All restarts run together as columns of one matrix. A column whose
    objective T[u]^3 ever decreases is switched to a convexity-guaranteeing
    shift. Returns ``(weight, unit_vector)``.
    """
    n = dense.shape[0]
    norm = float(np.linalg.norm(dense.ravel()))
    if norm == 0.0:
        return 0.0, np.eye(n)[0]
    U = rng.standard_normal((n, restarts))
    U /= np.linalg.norm(U, axis=0)
    shift = np.zeros(restarts)
    safe_shift = 2.0 * norm

    def images(V):
        partial = np.tensordot(dense, V, axes=([2], [0]))
        out = np.einsum("ijr,jr->ir", partial, V)
        return out, np.sum(out * V, axis=0)

    image, values = images(U)
    converged = np.zeros(restarts, dtype=bool)
    for it in range(max_iter):
        step = image + shift * U
        lengths = np.linalg.norm(step, axis=0)
        lengths[lengths == 0.0] = 1.0
        U_new = step / lengths
        image_new, new_values = images(U_new)
        dropped = new_values < values - 1e-14 * norm
        shift[dropped] = safe_shift
        converged = ~dropped & (np.abs(new_values - values) <= tol * max(norm, 1.0))
        keep = ~dropped
        U[:, keep] = U_new[:, keep]
        image[:, keep] = image_new[:, keep]
        values[keep] = new_values[keep]
        if np.all(converged):
            break
        leader = int(np.argmax(values))
        if it >= 100 and converged[leader]:
            break
    if not np.any(converged):
        raise RankApproxError("power iteration did not converge from any start")
    best = int(np.argmax(np.where(converged, values, -np.inf)))
    return float(values[best]), U[:, best]


def _simultaneous_diagonalization(dense, rank, rng):
    """Algebraic rank-`rank` candidate from two random slices (exact for true low rank)."""
    n = dense.shape[0]
    x = rng.standard_normal(n)
    y = rng.standard_normal(n)
    slice_x = np.tensordot(dense, x, axes=([2], [0]))
    slice_y = np.tensordot(dense, y, axes=([2], [0]))
    eigvals, eigvecs = np.linalg.eigh(slice_y)
    keep = np.argsort(-np.abs(eigvals))[:rank]
    if np.min(np.abs(eigvals[keep])) <= 1e-12 * max(np.abs(eigvals).max(), 1e-300):
        return None
    basis = eigvecs[:, keep]
    reduced_x = basis.T @ slice_x @ basis
    reduced_y = basis.T @ slice_y @ basis
    _, mixing = np.linalg.eig(np.linalg.solve(reduced_y, reduced_x.T).T)
    directions = np.real(basis @ mixing)
    directions /= np.linalg.norm(directions, axis=0)
    gram = (directions.T @ directions) ** 3
    partial = np.tensordot(dense, directions, axes=([2], [0]))
    rhs = np.einsum("ijr,ir,jr->r", partial, directions, directions)
    try:
        weights = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        return None
    return np.array([_signed_factor(w, directions[:, k]) for k, w in enumerate(weights)])


def _refine(dense, factors, max_iter=300):
    """Least-squares polish of the factors on 0.5||T - sum a(x)a(x)a||^2."""
    rank, n = factors.shape

    def objective(flat):
        A = flat.reshape(rank, n)
        residual = dense - _reconstruct(A, n)
        grad = -3.0 * np.einsum("ijk,rj,rk->ri", residual, A, A)
        return 0.5 * float(np.sum(residual ** 2)), grad.ravel()

    out = minimize(
        objective, factors.ravel(), jac=True, method="L-BFGS-B",
        options={"maxiter": max_iter, "gtol": 1e-14, "ftol": 1e-30},
    )
    return out.x.reshape(rank, n)


def rank_approx(T, P, rng=None, restarts=50, tol=1e-10):
    """Factors a_1..a_P with sum_k a_k(x)a_k(x)a_k approximating T.

    Ranks are built up one at a time. At each rank the candidates are the
    previous factors plus the best rank-one term of the remainder, an
    algebraic simultaneous-diagonalization fit; the smallest residual wins,
    and at the final rank least-squares polished versions compete too.
    Adding the best rank-one term never increases the residual, so the fit
    is never worse than the zero tensor.
    """
    dense = T.to_dense() if isinstance(T, SymTensor3) else np.asarray(T, dtype=float)
    n = dense.shape[0]
    if not 1 <= P <= n:
        raise ValueError("need 1 <= P <= n")
    if rng is None or isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)
    total = float(np.linalg.norm(dense.ravel()))
    if total == 0.0:
        return np.zeros((P, n))
    exact = tol * total

    current = np.zeros((0, n))
    current_res = total
    for k in range(1, P + 1):
        remainder = dense - _reconstruct(current, n)
        weight, direction = best_rank_one(remainder, rng, restarts=restarts, tol=tol)
        deflated = np.vstack([current, _signed_factor(weight, direction)])
        candidates = [deflated]
        algebraic = _simultaneous_diagonalization(dense, k, rng)
        if algebraic is not None and np.all(np.isfinite(algebraic)):
            candidates.append(algebraic)
        scored = [(reconstruction_residual(dense, c), i, c) for i, c in enumerate(candidates)]
        best_res, _, best = min(scored, key=lambda item: item[:2])
        if best_res > exact and k == P:
            for c in candidates:
                polished = _refine(dense, c)
                res = reconstruction_residual(dense, polished)
                if res < best_res:
                    best_res, best = res, polished
        if best_res > current_res:
            raise RankApproxError("rank increase made the fit worse")
        current, current_res = best, best_res
    return current


def orth_complement(C_hat):
    """Orthonormal rows spanning the orthogonal complement of the rows of C_hat."""
    C_hat = np.atleast_2d(np.asarray(C_hat, dtype=float))
    P, n = C_hat.shape
    if np.linalg.matrix_rank(C_hat) < P:
        raise np.linalg.LinAlgError("rows of C_hat are linearly dependent")
    return sla.null_space(C_hat).T.reshape(n - P, n)


def change_of_basis(factors):
    """The matrix C = [factors; complement] and its inverse."""
    factors = np.atleast_2d(np.asarray(factors, dtype=float))
    C = np.vstack([factors, orth_complement(factors)])
    return C, np.linalg.inv(C)

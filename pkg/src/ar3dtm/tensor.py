"""Metrics, symmetric third-order tensors and generalized eigenproblems."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla


def _as_vector(x, n=None, name="vector"):
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if n is not None and x.shape[0] != n:
        raise ValueError(f"{name} has length {x.shape[0]}, expected {n}")
    return x


def symmetrize(entries):
    """Average a cubic array over all six index permutations."""
    entries = np.asarray(entries, dtype=float)
    perms = itertools.permutations(range(3))
    return sum(np.transpose(entries, p) for p in perms) / 6.0


class Metric:
    """Symmetric positive-definite weight matrix defining ``||v||_W``.

    ``Metric.identity(n)`` avoids forming or factorizing the identity.
    """

    def __init__(self, W=None, n=None):
        if W is None:
            if n is None:
                raise ValueError("identity metric needs a dimension")
            self.n = int(n)
            self.is_identity = True
            self._W = None
        else:
            W = np.array(W, dtype=float)
            if W.ndim != 2 or W.shape[0] != W.shape[1]:
                raise ValueError("W must be a square matrix")
            if not np.allclose(W, W.T, rtol=1e-12, atol=1e-12 * max(1.0, np.abs(W).max())):
                raise ValueError("W must be symmetric")
            self._W = 0.5 * (W + W.T)
            self._W.setflags(write=False)
            self.n = W.shape[0]
            self.is_identity = False
            # factorize eagerly so a non-PD W fails at construction
            _ = self.cholesky

    @classmethod
    def identity(cls, n):
        return cls(n=n)

    @property
    def matrix(self):
        if self.is_identity:
            return np.eye(self.n)
        return self._W

    @cached_property
    def cholesky(self):
        """Lower Cholesky factor L with W = L L^T."""
        if self.is_identity:
            return np.eye(self.n)
        try:
            return sla.cholesky(self._W, lower=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("metric W is not positive definite") from exc

    @cached_property
    def _extreme_eigs(self):
        if self.is_identity:
            return 1.0, 1.0
        eigs = np.linalg.eigvalsh(self._W)
        if eigs[0] <= 0:
            raise np.linalg.LinAlgError("metric W is not positive definite")
        return float(eigs[0]), float(eigs[-1])

    @property
    def lambda_min(self):
        return self._extreme_eigs[0]

    @property
    def lambda_max(self):
        return self._extreme_eigs[1]

    def apply(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_identity:
            return v.copy()
        return self._W @ v

    def norm(self, v):
        v = np.asarray(v, dtype=float)
        if self.is_identity:
            return float(np.linalg.norm(v))
        return float(np.sqrt(max(v @ self._W @ v, 0.0)))

    def is_diagonal(self):
        if self.is_identity:
            return True
        return np.count_nonzero(self._W - np.diag(np.diag(self._W))) == 0

    def to_json(self):
        return "identity" if self.is_identity else self._W.tolist()

    @classmethod
    def from_json(cls, data, n):
        if data is None or data == "identity":
            return cls.identity(n)
        return cls(np.asarray(data, dtype=float))

    def __eq__(self, other):
        if not isinstance(other, Metric) or other.n != self.n:
            return NotImplemented
        return np.array_equal(self.matrix, other.matrix)

    def __repr__(self):
        return f"Metric(n={self.n}, identity={self.is_identity})"


class SymTensor3:
    """Supersymmetric third-order tensor.

    Four storage kinds are supported: ``zero``, ``diagonal`` (vector ``t``),
    ``lowrank`` (factor rows ``a_k`` with ``T = sum_k a_k (x) a_k (x) a_k``)
    and ``dense`` (all ``n**3`` entries). The diagonal and low-rank paths never
    build an ``n**3`` array when contracting.
    """

    KINDS = ("zero", "diagonal", "lowrank", "dense")

    def __init__(self, kind, n, data=None):
        if kind not in self.KINDS:
            raise ValueError(f"unknown tensor kind {kind!r}")
        self.kind = kind
        self.n = int(n)
        if kind == "zero":
            self.data = None
        elif kind == "diagonal":
            self.data = _as_vector(data, self.n, "diagonal t")
        elif kind == "lowrank":
            factors = np.atleast_2d(np.asarray(data, dtype=float))
            if factors.shape[1] != self.n:
                raise ValueError("low-rank factors must have n columns")
            self.data = factors
        else:
            entries = np.asarray(data, dtype=float)
            if entries.shape != (self.n,) * 3:
                raise ValueError(f"dense entries must have shape {(self.n,) * 3}")
            self.data = entries
        if self.data is not None:
            self.data.setflags(write=False)

    @classmethod
    def zero(cls, n):
        return cls("zero", n)

    @classmethod
    def diagonal(cls, t):
        t = _as_vector(t, name="diagonal t")
        return cls("diagonal", t.shape[0], t.copy())

    @classmethod
    def lowrank(cls, factors):
        factors = np.atleast_2d(np.array(factors, dtype=float))
        return cls("lowrank", factors.shape[1], factors)

    @classmethod
    def dense(cls, entries, symmetrize_entries=True):
        entries = np.array(entries, dtype=float)
        if entries.ndim != 3 or len(set(entries.shape)) != 1:
            raise ValueError("dense tensor entries must be an n x n x n array")
        if symmetrize_entries:
            entries = symmetrize(entries)
        return cls("dense", entries.shape[0], entries)

    @property
    def factors(self):
        if self.kind != "lowrank":
            raise AttributeError("only low-rank tensors carry factors")
        return self.data

    @property
    def rank(self):
        return self.data.shape[0] if self.kind == "lowrank" else None

    def contract(self, s, order):
        """Return T[s] (matrix), T[s]^2 (vector) or T[s]^3 (scalar)."""
        s = _as_vector(s, self.n, "s")
        if order not in (1, 2, 3):
            raise ValueError("order must be 1, 2 or 3")
        if self.kind == "zero":
            return (np.zeros((self.n, self.n)), np.zeros(self.n), 0.0)[order - 1]
        if self.kind == "diagonal":
            ts = self.data * s
            if order == 1:
                return np.diag(ts)
            if order == 2:
                return ts * s
            return float(ts @ (s * s))
        if self.kind == "lowrank":
            proj = self.data @ s
            if order == 1:
                return (self.data.T * proj) @ self.data
            if order == 2:
                return self.data.T @ (proj * proj)
            return float(np.sum(proj ** 3))
        mat = np.tensordot(self.data, s, axes=([2], [0]))
        if order == 1:
            return mat
        vec = mat @ s
        if order == 2:
            return vec
        return float(vec @ s)

    def trilinear(self, u, v, w):
        """T[u, v, w] for three possibly different vectors."""
        u = _as_vector(u, self.n, "u")
        v = _as_vector(v, self.n, "v")
        w = _as_vector(w, self.n, "w")
        if self.kind == "zero":
            return 0.0
        if self.kind == "diagonal":
            return float(np.sum(self.data * u * v * w))
        if self.kind == "lowrank":
            return float(np.sum((self.data @ u) * (self.data @ v) * (self.data @ w)))
        return float(np.einsum("ijk,i,j,k->", self.data, u, v, w))

    def diagonal_entries(self):
        """The entries T[j, j, j]."""
        if self.kind == "zero":
            return np.zeros(self.n)
        if self.kind == "diagonal":
            return self.data.copy()
        if self.kind == "lowrank":
            return np.sum(self.data ** 3, axis=0)
        idx = np.arange(self.n)
        return self.data[idx, idx, idx].copy()

    def to_dense(self):
        n = self.n
        if self.kind == "zero":
            return np.zeros((n, n, n))
        if self.kind == "diagonal":
            out = np.zeros((n, n, n))
            idx = np.arange(n)
            out[idx, idx, idx] = self.data
            return out
        if self.kind == "lowrank":
            return np.einsum("ki,kj,kl->ijl", self.data, self.data, self.data)
        return np.array(self.data)

    def densified(self):
        return SymTensor3("dense", self.n, self.to_dense())

    def plus_dense(self, entries):
        """Dense tensor self + entries."""
        return SymTensor3("dense", self.n, self.to_dense() + entries)

    def frobenius(self):
        if self.kind == "zero":
            return 0.0
        if self.kind == "diagonal":
            return float(np.linalg.norm(self.data))
        if self.kind == "lowrank":
            gram = self.data @ self.data.T
            return float(np.sqrt(max(np.sum(gram ** 3), 0.0)))
        return float(np.linalg.norm(self.data.ravel()))

    def to_json(self):
        if self.kind == "zero":
            return {"kind": "zero"}
        if self.kind == "diagonal":
            return {"kind": "diagonal", "t": self.data.tolist()}
        if self.kind == "lowrank":
            return {"kind": "lowrank", "factors": self.data.tolist()}
        return {"kind": "dense", "entries": self.data.ravel().tolist()}

    @classmethod
    def from_json(cls, data, n):
        kind = data.get("kind")
        if kind == "zero":
            return cls.zero(n)
        if kind == "diagonal":
            return cls("diagonal", n, data["t"])
        if kind == "lowrank":
            return cls("lowrank", n, data["factors"])
        if kind == "dense":
            entries = np.asarray(data["entries"], dtype=float).reshape(n, n, n)
            return cls.dense(entries)
        raise ValueError(f"unknown tensor kind {kind!r}")

    def __repr__(self):
        return f"SymTensor3(kind={self.kind!r}, n={self.n})"


def contraction_cost(T, order):
    """Scalar multiplications used by ``T.contract(s, order)`` on its storage path."""
    n = T.n
    if order not in (1, 2, 3):
        raise ValueError("order must be 1, 2 or 3")
    if T.kind == "zero":
        return 0
    if T.kind == "diagonal":
        return (n, 2 * n, 3 * n)[order - 1]
    if T.kind == "lowrank":
        P = T.rank
        return P * n + (P * n * n + P * n, P * n + P, P)[order - 1]
    return n ** 3 + (0, n * n, n * n + n)[order - 1]


def frobenius_bound(T):
    """Upper bound on the operator norm max |T[u][v]^2| over unit u, v."""
    return T.frobenius()


def lambda_w(T, W):
    """Upper bound on max |T[u][v]^2| / (||u||_W ||v||_W^2).

    Diagonal tensors get the closed form ``max|t_j| / lambda_min(W)^1.5``,
    or exactly 1 when ``W = diag(|t_j|^(2/3))``. Other kinds use the
    Frobenius norm in place of the operator norm.
    """
    if T.kind == "zero":
        return 0.0
    if T.kind == "diagonal":
        t_abs = np.abs(T.data)
        if not W.is_identity and W.is_diagonal() and np.all(t_abs > 0):
            if np.allclose(np.diag(W.matrix), t_abs ** (2.0 / 3.0), rtol=1e-12, atol=0.0):
                return 1.0
        return float(t_abs.max() * W.lambda_min ** -1.5)
    return frobenius_bound(T) * W.lambda_min ** -1.5


@dataclass(frozen=True)
class GenEig:
    """Eigenpairs of the pencil (A, W): A U = W U diag(D), U^T W U = I."""

    D: np.ndarray
    U: np.ndarray


def generalized_eig(A, W):
    A = np.asarray(A, dtype=float)
    if W.is_identity:
        D, U = np.linalg.eigh(0.5 * (A + A.T))
        return GenEig(D, U)
    L = W.cholesky
    left = sla.solve_triangular(L, A, lower=True)
    reduced = sla.solve_triangular(L, left.T, lower=True)
    D, Q = np.linalg.eigh(0.5 * (reduced + reduced.T))
    U = sla.solve_triangular(L.T, Q, lower=False)
    return GenEig(D, U)


def pencil_min_eig(A, W):
    """Smallest eigenvalue of the pencil (A, W) without eigenvectors."""
    A = np.asarray(A, dtype=float)
    if W.is_identity:
        return float(np.linalg.eigvalsh(0.5 * (A + A.T))[0])
    return float(sla.eigh(0.5 * (A + A.T), W.matrix, eigvals_only=True, subset_by_index=[0, 0])[0])

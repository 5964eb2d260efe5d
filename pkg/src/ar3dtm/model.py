"""The quartically regularized cubic model and its separable variant."""

from __future__ import annotations

import numpy as np

from .tensor import Metric, SymTensor3, _as_vector


def _as_symmetric(H, n=None):
    H = np.array(H, dtype=float)
    if H.ndim == 0:
        H = H.reshape(1, 1)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError("H must be a square matrix")
    if n is not None and H.shape[0] != n:
        raise ValueError(f"H has size {H.shape[0]}, expected {n}")
    scale = max(1.0, float(np.abs(H).max()) if H.size else 1.0)
    if not np.allclose(H, H.T, rtol=0.0, atol=1e-10 * scale):
        raise ValueError("H must be symmetric")
    return 0.5 * (H + H.T)


def quartic_third_derivative(sigma, W, p):
    """Dense third derivative of (sigma/4)||s||_W^4 at p.

    Entry (i, j, k) is 2 sigma [(Wp)_i W_jk + (Wp)_j W_ik + (Wp)_k W_ij].
    """
    Wp = W.apply(p)
    Wm = W.matrix
    term = np.einsum("i,jk->ijk", Wp, Wm)
    return 2.0 * sigma * (term + term.transpose(1, 0, 2) + term.transpose(1, 2, 0))


class QuarticModel:
    """m(s) = f0 + g's + H[s]^2/2 + T[s]^3/6 + (sigma/4)||s||_W^4."""

    def __init__(self, f0, g, H, T, sigma, W=None):
        g = _as_vector(g, name="g")
        n = g.shape[0]
        self.n = n
        self.f0 = float(f0)
        self.g = g.copy()
        self.H = _as_symmetric(H, n)
        if T is None:
            T = SymTensor3.zero(n)
        if T.n != n:
            raise ValueError("tensor dimension does not match g")
        self.T = T
        if not sigma > 0:
            raise ValueError("sigma must be positive")
        self.sigma = float(sigma)
        if W is None:
            W = Metric.identity(n)
        elif not isinstance(W, Metric):
            W = Metric(W)
        if W.n != n:
            raise ValueError("metric dimension does not match g")
        self.W = W
        self.g.setflags(write=False)
        self.H.setflags(write=False)

    def replace(self, **changes):
        fields = dict(f0=self.f0, g=self.g, H=self.H, T=self.T, sigma=self.sigma, W=self.W)
        fields.update(changes)
        return QuarticModel(**fields)

    def value(self, s):
        return evaluate(self, s, 0)[0]

    def gradient(self, s):
        return evaluate(self, s, 1)[1]

    def hessian(self, s):
        return evaluate(self, s, 2)[2]

    def __call__(self, s):
        return self.value(s)

    def to_json(self):
        return {
            "n": self.n,
            "f0": self.f0,
            "g": self.g.tolist(),
            "H": self.H.tolist(),
            "tensor": self.T.to_json(),
            "sigma": self.sigma,
            "W": self.W.to_json(),
        }

    @classmethod
    def from_json(cls, data):
        n = int(data["n"])
        return cls(
            data.get("f0", 0.0),
            data["g"],
            np.asarray(data["H"], dtype=float).reshape(n, n),
            SymTensor3.from_json(data.get("tensor", {"kind": "zero"}), n),
            data["sigma"],
            Metric.from_json(data.get("W", "identity"), n),
        )

    def __repr__(self):
        return f"QuarticModel(n={self.n}, tensor={self.T.kind}, sigma={self.sigma:g})"


def evaluate(m, s, upto=0):
    """Value and, for ``upto`` >= 1 / 2, gradient and Hessian of m at s."""
    s = _as_vector(s, m.n, "s")
    Ws = m.W.apply(s)
    norm2 = float(s @ Ws)
    Hs = m.H @ s
    if upto >= 1 or m.T.kind == "dense":
        Ts2 = m.T.contract(s, 2)
        cubic = float(Ts2 @ s)
    else:
        Ts2 = None
        cubic = m.T.contract(s, 3)
    value = m.f0 + m.g @ s + 0.5 * (s @ Hs) + cubic / 6.0 + 0.25 * m.sigma * norm2 ** 2
    if upto == 0:
        return float(value), None, None
    grad = m.g + Hs + 0.5 * Ts2 + m.sigma * norm2 * Ws
    if upto == 1:
        return float(value), grad, None
    hess = m.H + m.T.contract(s, 1) + m.sigma * (norm2 * m.W.matrix + 2.0 * np.outer(Ws, Ws))
    return float(value), grad, 0.5 * (hess + hess.T)


def increment(m, s):
    """m(s) - m(0), summed without f0 so small changes keep their precision."""
    s = _as_vector(s, m.n, "s")
    norm2 = float(s @ m.W.apply(s))
    return float(m.g @ s + 0.5 * (s @ m.H @ s) + m.T.contract(s, 3) / 6.0
                 + 0.25 * m.sigma * norm2 ** 2)


def gradient_scale(m, s):
    """Gradient of m at s with every coefficient and coordinate made nonnegative.

    The rounding error in a computed gradient is a modest multiple of
    machine precision times this number, which sets the attainable accuracy.
    """
    s = np.abs(_as_vector(s, m.n, "s"))
    W_abs = np.abs(m.W.matrix)
    Ws = W_abs @ s
    T_abs = SymTensor3(m.T.kind, m.n, None if m.T.data is None else np.abs(m.T.data))
    return float(
        np.linalg.norm(m.g) + np.linalg.norm(np.abs(m.H) @ s)
        + 0.5 * np.linalg.norm(T_abs.contract(s, 2)) + m.sigma * float(s @ Ws) * np.linalg.norm(Ws)
    )


def evaluate_batch(m, S):
    """Values of m at each row of S."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    if S.shape[1] != m.n:
        raise ValueError("points must have n columns")
    WS = S if m.W.is_identity else S @ m.W.matrix
    norm2 = np.einsum("ij,ij->i", S, WS)
    quad = np.einsum("ij,ij->i", S @ m.H, S)
    T = m.T
    if T.kind == "zero":
        cubic = np.zeros(len(S))
    elif T.kind == "diagonal":
        cubic = (S ** 3) @ T.data
    elif T.kind == "lowrank":
        cubic = np.sum((S @ T.data.T) ** 3, axis=1)
    else:
        cubic = np.einsum("ijk,pi,pj,pk->p", T.data, S, S, S, optimize=True)
    return m.f0 + S @ m.g + 0.5 * quad + cubic / 6.0 + 0.25 * m.sigma * norm2 ** 2


def hessian_batch(m, S):
    """Hessians of m at each row of S, shape (N, n, n)."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    Wm = m.W.matrix
    WS = S @ Wm
    norm2 = np.einsum("ij,ij->i", S, WS)
    T = m.T
    if T.kind == "zero":
        tensor_part = 0.0
    elif T.kind == "diagonal":
        tensor_part = np.einsum("pi,ij->pij", S * T.data, np.eye(m.n))
    elif T.kind == "lowrank":
        proj = S @ T.data.T
        tensor_part = np.einsum("pk,ki,kj->pij", proj, T.data, T.data)
    else:
        tensor_part = np.einsum("ijk,pk->pij", T.data, S)
    return (
        m.H[None]
        + tensor_part
        + m.sigma * (norm2[:, None, None] * Wm[None] + 2.0 * np.einsum("pi,pj->pij", WS, WS))
    )


def shift(m, p):
    """Model m' with m'(s) = m(p + s) exactly.

    The regularizer keeps its weight and metric; its lower-order Taylor
    terms at p are folded into the polynomial coefficients and the stored
    tensor becomes the full third derivative of m at p.
    """
    p = _as_vector(p, m.n, "p")
    if not np.any(p):
        return m
    value, grad, hess = evaluate(m, p, 2)
    third = m.T.to_dense() + quartic_third_derivative(m.sigma, m.W, p)
    return QuarticModel(value, grad, hess, SymTensor3("dense", m.n, third), m.sigma, m.W)


def difference_decomposition(m, s, v):
    """Split m(s + v) - m(s) into linear, quadratic, cubic and quartic terms.

    The terms are [g + B(s)s]'v, G(s)[v]^2/2, T[v]^3/6 and
    (sigma/4)(||s+v||_W^2 - ||s||_W^2)^2.
    """
    from .optimality import operators

    s = _as_vector(s, m.n, "s")
    v = _as_vector(v, m.n, "v")
    B, G = operators(m, s)
    linear = float((m.g + B @ s) @ v)
    quadratic = 0.5 * float(v @ G @ v)
    cubic = m.T.contract(v, 3) / 6.0
    sw = m.W.apply(s)
    vw = m.W.apply(v)
    # ||s+v||^2 - ||s||^2 expanded to avoid cancellation
    change = 2.0 * float(sw @ v) + float(v @ vw)
    quartic = 0.25 * m.sigma * change ** 2
    return linear, quadratic, cubic, quartic


class SqrModel:
    """Separable model f0 + g's + H[s]^2/2 + sum t_j s_j^3/6 + sum sig_j s_j^4/4."""

    def __init__(self, f0, g, H, t, sig):
        g = _as_vector(g, name="g")
        n = g.shape[0]
        self.n = n
        self.f0 = float(f0)
        self.g = g.copy()
        self.H = _as_symmetric(H, n)
        self.t = _as_vector(t, n, "t").copy()
        self.sig = _as_vector(sig, n, "sig").copy()
        if np.any(self.sig <= 0):
            raise ValueError("all quartic weights must be positive")

    def value(self, s):
        s = _as_vector(s, self.n, "s")
        return float(
            self.f0 + self.g @ s + 0.5 * s @ self.H @ s
            + np.sum(self.t * s ** 3) / 6.0 + 0.25 * np.sum(self.sig * s ** 4)
        )

    def gradient(self, s):
        s = _as_vector(s, self.n, "s")
        return self.g + self.H @ s + 0.5 * self.t * s ** 2 + self.sig * s ** 3

    def hessian(self, s):
        s = _as_vector(s, self.n, "s")
        return self.H + np.diag(self.t * s + 3.0 * self.sig * s ** 2)

    def to_json(self):
        return {
            "n": self.n,
            "f0": self.f0,
            "g": self.g.tolist(),
            "H": self.H.tolist(),
            "t": self.t.tolist(),
            "sig": self.sig.tolist(),
        }

    @classmethod
    def from_json(cls, data):
        n = int(data["n"])
        return cls(data.get("f0", 0.0), data["g"], np.asarray(data["H"]).reshape(n, n), data["t"], data["sig"])


def sqr_operators(m, s):
    """The matrices B_hat(s) and G_hat(s) of the separable model."""
    s = _as_vector(s, m.n, "s")
    ts = m.t * s
    quartic = m.sig * s ** 2
    B = m.H + np.diag(0.5 * ts + quartic)
    G = m.H + np.diag(ts / 3.0 + quartic - m.t ** 2 / (18.0 * m.sig))
    return B, G


def sqr_decomposition(m, s, v):
    """Split m(s + v) - m(s) for the separable model into three terms.

    The last term is a weighted sum of squares and never negative.
    """
    if np.any(m.sig <= 0):
        raise ValueError("all quartic weights must be positive")
    s = _as_vector(s, m.n, "s")
    v = _as_vector(v, m.n, "v")
    B, G = sqr_operators(m, s)
    linear = float((m.g + B @ s) @ v)
    quadratic = 0.5 * float(v @ G @ v)
    inner = np.sqrt(m.sig) * v * (v + 2.0 * s + m.t / (3.0 * m.sig))
    return linear, quadratic, 0.25 * float(inner @ inner)


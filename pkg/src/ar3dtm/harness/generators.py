"""Seeded random test sets for the regularized cubic model."""

from __future__ import annotations

from dataclasses import asdict, dataclass, replace

import numpy as np

from ..model import QuarticModel
from ..tensor import SymTensor3, symmetrize

KINDS = ("diagonal", "lowrank", "full", "ill_hessian", "ill_tensor")

# (a, b, c, sigma) per test set; None marks a coefficient the set does not use
DEFAULTS = {
    "diagonal": (10.0, 20.0, 20.0, 100.0),
    "lowrank": (10.0, 20.0, 20.0, 100.0),
    "full": (80.0, 80.0, 80.0, 100.0),
    "ill_hessian": (10.0, None, 20.0, 100.0),
    "ill_tensor": (10.0, 20.0, None, 500.0),
}
ILL_RANGE = (1e-6, 1e3)


@dataclass(frozen=True)
class GenSpec:
    """One random instance: test set, size, scalings and the seed/trial pair.

    Unset scalings take the test set's defaults.
    """

    kind: str
    n: int
    seed: int = 0
    trial: int = 0
    a: float | None = None
    b: float | None = None
    c: float | None = None
    sigma: float | None = None
    rank: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown test set {self.kind!r}; choose from {KINDS}")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if self.kind == "lowrank" and not 1 <= self.rank <= self.n:
            raise ValueError("rank must lie in [1, n]")
        sigma = DEFAULTS[self.kind][3] if self.sigma is None else self.sigma
        if not sigma > 0:
            raise ValueError("sigma must be positive")

    def resolved(self):
        """Copy with every unset scaling replaced by the test set's default."""
        defaults = dict(zip("abc", DEFAULTS[self.kind][:3]), sigma=DEFAULTS[self.kind][3])
        given = {"a": self.a, "b": self.b, "c": self.c, "sigma": self.sigma}
        return replace(self, **{k: defaults[k] if v is None else float(v) for k, v in given.items()})

    def rng(self):
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([self.seed, self.trial])))

    def to_json(self):
        return asdict(self)


def symm(M):
    """Symmetric part of a square matrix."""
    return 0.5 * (M + M.T)


def generate(spec):
    """Build the model for a ``GenSpec``; equal inputs give identical models."""
    spec = spec.resolved()
    rng = spec.rng()
    n = spec.n
    g = spec.a * rng.standard_normal(n)
    if spec.kind == "ill_hessian":
        H = np.diag(rng.uniform(*ILL_RANGE, size=n))
    else:
        H = spec.b * symm(rng.standard_normal((n, n)))
    if spec.kind in ("diagonal", "ill_hessian"):
        T = SymTensor3.diagonal(spec.c * rng.standard_normal(n))
    elif spec.kind == "ill_tensor":
        T = SymTensor3.diagonal(rng.uniform(*ILL_RANGE, size=n))
    elif spec.kind == "lowrank":
        T = SymTensor3.lowrank(spec.c * rng.standard_normal((spec.rank, n)))
    else:
        T = SymTensor3.dense(spec.c * symmetrize(rng.standard_normal((n, n, n))), symmetrize_entries=False)
    return QuarticModel(0.0, g, H, T, spec.sigma)

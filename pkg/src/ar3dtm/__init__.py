"""Minimization and global-optimality certificates for quartically regularized cubic models."""

from .arc import ArcConfig, arc_minimize, cubic_step
from .dtm import DtmConfig, DtmTrace, build_model, minimize
from .lowrank import RankApproxError, orth_complement, rank_approx
from .model import QuarticModel, SqrModel, difference_decomposition, evaluate
from .optimality import OptimalityReport, classify, classify_sqr, operators, sigma_thresholds
from .secular import SecularConfig, SecularResult, newton_update, solve
from .tensor import Metric, SymTensor3, lambda_w

__version__ = "0.1.0"

__all__ = [
    "ArcConfig", "DtmConfig", "DtmTrace", "Metric", "OptimalityReport", "QuarticModel",
    "RankApproxError", "SecularConfig", "SecularResult", "SqrModel", "SymTensor3", "arc_minimize",
    "build_model", "classify", "classify_sqr", "cubic_step", "difference_decomposition",
    "evaluate", "lambda_w", "minimize", "newton_update", "operators", "orth_complement",
    "rank_approx", "sigma_thresholds", "solve",
]

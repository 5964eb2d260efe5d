"""Test-set generators, the brute-force oracle, experiments and the CLI."""

from .generators import KINDS, GenSpec, generate
from .oracle import OracleResult, brute_force_min

__all__ = ["KINDS", "GenSpec", "OracleResult", "brute_force_min", "generate"]

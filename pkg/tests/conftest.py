import numpy as np
import pytest

from ar3dtm.model import QuarticModel
from ar3dtm.tensor import Metric, SymTensor3


def random_spd(rng, n, spread=1.0):
    A = rng.standard_normal((n, n))
    return A @ A.T / n + spread * np.eye(n)


def random_tensor(rng, n, kind):
    if kind == "zero":
        return SymTensor3.zero(n)
    if kind == "diagonal":
        return SymTensor3.diagonal(rng.standard_normal(n) * 3)
    if kind == "lowrank":
        return SymTensor3.lowrank(rng.standard_normal((min(2, n), n)))
    return SymTensor3.dense(rng.standard_normal((n, n, n)) * 2)


def random_model(rng, n, kind="dense", weighted=False, sigma=None):
    H = rng.standard_normal((n, n))
    W = Metric(random_spd(rng, n)) if weighted else Metric.identity(n)
    return QuarticModel(
        float(rng.standard_normal()),
        rng.standard_normal(n),
        H + H.T,
        random_tensor(rng, n, kind),
        float(rng.uniform(0.5, 3.0)) if sigma is None else sigma,
        W,
    )


def pattern_112():
    """Dense n=2 tensor with T[0,0,1] and its permutations equal to 1."""
    entries = np.zeros((2, 2, 2))
    for idx in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
        entries[idx] = 1.0
    return SymTensor3.dense(entries, symmetrize_entries=False)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def cubic_quartic_1d():
    """m(s) = -s^3 + (3/4) s^4, global minimizer s = 1 with value -1/4."""
    return QuarticModel(0.0, [0.0], [[0.0]], SymTensor3.diagonal([-6.0]), 3.0)


@pytest.fixture
def qqr_1d():
    """m(s) = -s + s^2/2 + s^4/4, minimizer the real root of s^3 + s = 1."""
    return QuarticModel(0.0, [-1.0], [[1.0]], SymTensor3.zero(1), 1.0)


_criteria = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid or report.when != "call" and not report.failed:
        return
    name = report.nodeid.split("::")[-1]
    if not name.startswith("test_criterion_"):
        return
    number = int(name.split("_")[2])
    if report.when == "call" or report.failed:
        _criteria[number] = (name, "PASS" if report.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        name, outcome = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d}: {outcome}  {name}")
    passed = sum(outcome == "PASS" for _, outcome in _criteria.values())
    terminalreporter.write_line(f"{passed}/{len(_criteria)} criteria passed")

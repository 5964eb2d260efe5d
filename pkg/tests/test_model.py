import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ar3dtm.model import (
    QuarticModel, SqrModel, difference_decomposition, evaluate, evaluate_batch, gradient_scale,
    hessian_batch, increment, shift, sqr_decomposition, sqr_operators,
)
from ar3dtm.optimality import operators
from ar3dtm.tensor import SymTensor3
from conftest import random_model


def central_gradient(m, s, h=1e-5):
    n = len(s)
    return np.array([(m.value(s + h * e) - m.value(s - h * e)) / (2 * h) for e in np.eye(n)])


def central_hessian(m, s, h=1e-5):
    n = len(s)
    return np.array([(m.gradient(s + h * e) - m.gradient(s - h * e)) / (2 * h) for e in np.eye(n)])


def random_sqr(rng, n, diagonal_h=False):
    H = rng.standard_normal((n, n))
    H = np.diag(np.diag(H)) * 2 if diagonal_h else H + H.T
    return SqrModel(float(rng.standard_normal()), rng.standard_normal(n), H,
                    rng.standard_normal(n) * 3, rng.uniform(0.5, 3.0, n))


class TestEvaluate:
    def test_origin_returns_coefficients(self, rng):
        m = random_model(rng, 4)
        value, grad, hess = evaluate(m, np.zeros(4), 2)
        assert value == m.f0
        np.testing.assert_allclose(grad, m.g)
        np.testing.assert_allclose(hess, m.H)

    def test_one_dimensional(self, cubic_quartic_1d):
        value, grad, hess = evaluate(cubic_quartic_1d, [1.0], 2)
        assert value == pytest.approx(-0.25)
        assert grad[0] == pytest.approx(0.0, abs=1e-15)
        assert hess[0, 0] == pytest.approx(3.0)

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError):
            evaluate(random_model(rng, 3), np.zeros(2))

    def test_rejects_nonpositive_sigma(self):
        with pytest.raises(ValueError):
            QuarticModel(0.0, [1.0], [[1.0]], None, 0.0)

    @pytest.mark.parametrize("kind", ["zero", "diagonal", "lowrank", "dense"])
    @pytest.mark.parametrize("weighted", [False, True])
    def test_finite_differences(self, rng, kind, weighted):
        for _ in range(5):
            n = int(rng.integers(1, 9))
            m = random_model(rng, n, kind, weighted)
            s = rng.standard_normal(n)
            _, grad, hess = evaluate(m, s, 2)
            fd_grad = central_gradient(m, s)
            fd_hess = central_hessian(m, s)
            assert np.linalg.norm(grad - fd_grad) <= 1e-6 * max(1.0, np.linalg.norm(grad))
            assert np.linalg.norm(hess - fd_hess) <= 1e-6 * max(1.0, np.linalg.norm(hess))

    def test_batch_matches_pointwise(self, rng):
        m = random_model(rng, 3, weighted=True)
        S = rng.standard_normal((7, 3))
        np.testing.assert_allclose(evaluate_batch(m, S), [m.value(s) for s in S], rtol=1e-12)
        for s, hess in zip(S, hessian_batch(m, S)):
            np.testing.assert_allclose(hess, m.hessian(s), rtol=1e-12, atol=1e-12)

    def test_increment_matches_difference(self, rng):
        m = random_model(rng, 4, weighted=True)
        s = rng.standard_normal(4)
        assert increment(m, s) == pytest.approx(m.value(s) - m.f0, rel=1e-12)

    def test_gradient_scale_dominates_gradient(self, rng):
        m = random_model(rng, 5, weighted=True)
        s = rng.standard_normal(5)
        assert gradient_scale(m, s) >= np.linalg.norm(m.gradient(s))

    def test_json_roundtrip(self, rng):
        m = random_model(rng, 3, "lowrank", weighted=True)
        back = QuarticModel.from_json(m.to_json())
        s = rng.standard_normal(3)
        assert back.value(s) == pytest.approx(m.value(s), rel=1e-14)


class TestShift:
    def test_zero_shift(self, rng):
        m = random_model(rng, 3)
        shifted = shift(m, np.zeros(3))
        s = rng.standard_normal(3)
        assert shifted.value(s) == pytest.approx(m.value(s))

    def test_pure_quartic(self):
        m = QuarticModel(0.0, [0.0], [[0.0]], None, 4.0)
        shifted = shift(m, [1.0])
        # (1 + s)^4 = 1 + 4 s + 6 s^2 + 4 s^3 + s^4 and s^4 = (4/4) s^4
        assert shifted.f0 == pytest.approx(1.0)
        assert shifted.g[0] == pytest.approx(4.0)
        assert shifted.H[0, 0] == pytest.approx(12.0)
        assert shifted.T.to_dense()[0, 0, 0] == pytest.approx(24.0)

    @pytest.mark.parametrize("weighted", [False, True])
    def test_exact_recentering(self, rng, weighted):
        m = random_model(rng, 3, weighted=weighted)
        p = rng.standard_normal(3)
        shifted = shift(m, p)
        for _ in range(5):
            s = rng.standard_normal(3)
            scale = 1 + abs(m.value(p + s))
            assert abs(shifted.value(s) - m.value(p + s)) <= 1e-10 * scale

    def test_composition(self, rng):
        m = random_model(rng, 3, "diagonal", weighted=True)
        p, q, s = rng.standard_normal((3, 3))
        twice = shift(shift(m, p), q)
        assert twice.value(s) == pytest.approx(m.value(p + q + s), rel=1e-10)


class TestDecomposition:
    def test_origin_terms(self, rng):
        m = random_model(rng, 3, weighted=True)
        v = rng.standard_normal(3)
        lin, quad, cub, quart = difference_decomposition(m, np.zeros(3), v)
        assert lin == pytest.approx(m.g @ v)
        assert quad == pytest.approx(0.5 * v @ m.H @ v)
        assert cub == pytest.approx(m.T.contract(v, 3) / 6)
        assert quart == pytest.approx(0.25 * m.sigma * m.W.norm(v) ** 4)

    def test_one_dimensional_example(self, cubic_quartic_1d):
        terms = difference_decomposition(cubic_quartic_1d, [1.0], [-2.0])
        assert sum(terms) == pytest.approx(2.0)
        assert cubic_quartic_1d.value([-1.0]) - cubic_quartic_1d.value([1.0]) == pytest.approx(2.0)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2 ** 32 - 1), st.sampled_from(["zero", "diagonal", "lowrank", "dense"]))
    def test_identity_and_nonnegative_quartic(self, n, seed, kind):
        rng = np.random.default_rng(seed)
        m = random_model(rng, n, kind, weighted=bool(seed % 2))
        s, v = rng.standard_normal((2, n)) * 2
        terms = difference_decomposition(m, s, v)
        scale = 1 + abs(m.value(s)) + abs(m.value(s + v))
        assert abs(sum(terms) - (m.value(s + v) - m.value(s))) <= 1e-10 * scale
        assert terms[3] >= 0

    def test_zero_tensor_gives_equal_operators(self, rng):
        m = random_model(rng, 4, "zero", weighted=True)
        B, G = operators(m, rng.standard_normal(4))
        np.testing.assert_array_equal(B, G)


class TestSqr:
    def test_reduces_without_cubic_term(self, rng):
        m = random_sqr(rng, 3)
        m0 = SqrModel(m.f0, m.g, m.H, np.zeros(3), m.sig)
        B, G = sqr_operators(m0, rng.standard_normal(3))
        np.testing.assert_allclose(B, G)

    def test_univariate_matches_quartic_model(self, cubic_quartic_1d):
        sqr = SqrModel(0.0, [0.0], [[0.0]], [-6.0], [3.0])
        terms = sqr_decomposition(sqr, [1.0], [-2.0])
        assert sum(terms) == pytest.approx(2.0)
        for x in np.linspace(-2, 2, 9):
            assert sqr.value([x]) == pytest.approx(cubic_quartic_1d.value([x]))

    def test_rejects_nonpositive_weight(self):
        with pytest.raises(ValueError):
            SqrModel(0.0, [1.0], [[1.0]], [0.0], [0.0])

    def test_identity_on_random_instances(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 6))
            m = random_sqr(rng, n)
            s, v = rng.standard_normal((2, n))
            terms = sqr_decomposition(m, s, v)
            scale = 1 + abs(m.value(s)) + abs(m.value(s + v))
            assert abs(sum(terms) - (m.value(s + v) - m.value(s))) <= 1e-10 * scale
            assert terms[2] >= 0

    def test_derivatives(self, rng):
        m = random_sqr(rng, 4)
        s = rng.standard_normal(4)
        np.testing.assert_allclose(m.gradient(s), central_gradient(m, s), rtol=1e-6, atol=1e-6)
        np.testing.assert_allclose(m.hessian(s), central_hessian(m, s), rtol=1e-6, atol=1e-6)

    def test_json_roundtrip(self, rng):
        m = random_sqr(rng, 3)
        back = SqrModel.from_json(m.to_json())
        s = rng.standard_normal(3)
        assert back.value(s) == pytest.approx(m.value(s))


def test_diagonal_tensor_model_matches_dense(rng):
    t = rng.standard_normal(4)
    m = QuarticModel(0.0, rng.standard_normal(4), np.eye(4), SymTensor3.diagonal(t), 2.0)
    dense = m.replace(T=SymTensor3.dense(m.T.to_dense()))
    s = rng.standard_normal(4)
    assert m.value(s) == pytest.approx(dense.value(s), rel=1e-13)

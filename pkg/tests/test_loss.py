"""
Hutchinson 손실 테스트
"""

import numpy as np
import pytest

from src.loss import (
    coo_matvec_scatter,
    draw_rademacher,
    frobenius_distance_sq,
    hutchinson_loss,
    hutchinson_loss_and_grad,
    hutchinson_loss_grad,
    llt_matvec_scatter,
    monte_carlo_loss,
)
from src.sparse import LowerFactor, SparseCoo, SparseFormatError, coo_to_csr, csr_matvec
from tests.conftest import random_lower, random_spd


def _factor(dense: np.ndarray) -> LowerFactor:
    return LowerFactor(SparseCoo.from_dense(dense))


class TestScatterMatvec:
    """select / scatter 행렬-벡터 곱 테스트"""

    def test_identity(self):
        z = np.array([1.0, -2.0, 3.0])
        assert coo_matvec_scatter(SparseCoo.identity(3), z).tolist() == z.tolist()

    def test_single_offdiagonal(self):
        """[[0, 2], [0, 0]] · [1, 1] = [2, 0]"""
        a = SparseCoo(2, 2, [0], [1], [2.0])
        assert coo_matvec_scatter(a, np.ones(2)).tolist() == [2.0, 0.0]

    def test_llt(self):
        """L = [[1, 0], [2, 1]], z = [1, 1] → L Lᵀ z = [3, 7]"""
        l = _factor(np.array([[1.0, 0.0], [2.0, 1.0]]))
        assert llt_matvec_scatter(l, np.ones(2)).tolist() == [3.0, 7.0]

    def test_matches_dense(self):
        rng = np.random.default_rng(0)
        dense = random_lower(30, seed=1, density=0.3)
        z = rng.standard_normal(30)
        expected = dense @ (dense.T @ z)
        assert np.allclose(llt_matvec_scatter(_factor(dense), z), expected, rtol=1e-13)

    def test_random_sweep_matches_dense(self):
        """n <= 200 랜덤 1000개: A z, L Lᵀ z 모두 밀집 곱과 상대 오차 < 1e-12"""
        rng = np.random.default_rng(11)
        worst = 0.0
        for seed in range(1000):
            n = int(rng.integers(1, 201))
            density = float(rng.uniform(0.01, 0.3))
            z = rng.standard_normal(n)

            a = random_spd(n, seed=seed, density=density)
            expected = a.to_dense() @ z
            got = coo_matvec_scatter(a, z)
            worst = max(worst, np.linalg.norm(got - expected) / np.linalg.norm(expected))

            dense_l = random_lower(n, seed=seed, density=density)
            expected = dense_l @ (dense_l.T @ z)
            got = llt_matvec_scatter(_factor(dense_l), z)
            worst = max(worst, np.linalg.norm(got - expected) / np.linalg.norm(expected))
        assert worst < 1e-12

    def test_matches_csr_matvec(self):
        """200x200 에서 scatter 곱과 CSR 곱이 일치"""
        a = random_spd(200, seed=5, density=0.1)
        z = np.random.default_rng(5).standard_normal(200)
        scatter = coo_matvec_scatter(a, z)
        csr = csr_matvec(coo_to_csr(a), z)
        assert np.linalg.norm(scatter - csr) / np.linalg.norm(csr) < 1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(SparseFormatError):
            coo_matvec_scatter(SparseCoo.identity(3), np.ones(2))
        with pytest.raises(SparseFormatError):
            llt_matvec_scatter(_factor(np.eye(2)), np.ones(3))


class TestRademacher:
    """Rademacher 벡터 생성 테스트"""

    def test_values_are_signs(self):
        z = draw_rademacher(1000, seed=0)
        assert set(np.unique(z.values).tolist()) == {-1.0, 1.0}
        assert z.n == 1000

    def test_deterministic(self):
        """같은 (seed, step, sample) → 같은 벡터"""
        a = draw_rademacher(64, seed=5, step=3, sample=1)
        b = draw_rademacher(64, seed=5, step=3, sample=1)
        assert np.array_equal(a.values, b.values)

    def test_streams_differ(self):
        base = draw_rademacher(64, seed=5, step=3, sample=1).values
        assert not np.array_equal(base, draw_rademacher(64, seed=5, step=4, sample=1).values)
        assert not np.array_equal(base, draw_rademacher(64, seed=5, step=3, sample=2).values)
        assert not np.array_equal(base, draw_rademacher(64, seed=6, step=3, sample=1).values)


class TestHutchinsonLoss:
    """손실 값 테스트"""

    def test_scalar_example(self):
        """A = [[4]], L = [[1]], z = [1] → (1 − 4)² = 9"""
        a = SparseCoo(1, 1, [0], [0], [4.0])
        assert hutchinson_loss(_factor(np.array([[1.0]])), a, np.ones(1)) == 9.0

    def test_exact_cholesky_zero(self):
        """정확한 Cholesky 인자는 손실 0"""
        a = random_spd(12, seed=3)
        l = _factor(np.linalg.cholesky(a.to_dense()))
        z = draw_rademacher(12, seed=1)
        assert hutchinson_loss(l, a, z) < 1e-20

    def test_accepts_rademacher_and_array(self):
        a = random_spd(8, seed=2)
        l = _factor(random_lower(8, seed=2))
        z = draw_rademacher(8, seed=9)
        assert hutchinson_loss(l, a, z) == hutchinson_loss(l, a, z.values)

    def test_parallelogram(self):
        """z에 대해 이차형식: f(x+y) + f(x−y) = 2 f(x) + 2 f(y)"""
        a = random_spd(10, seed=4)
        l = _factor(random_lower(10, seed=4))
        rng = np.random.default_rng(1)
        x, y = rng.standard_normal(10), rng.standard_normal(10)
        lhs = hutchinson_loss(l, a, x + y) + hutchinson_loss(l, a, x - y)
        rhs = 2 * hutchinson_loss(l, a, x) + 2 * hutchinson_loss(l, a, y)
        assert lhs == pytest.approx(rhs, rel=1e-10)

    def test_frobenius_matches_dense(self):
        a = random_spd(9, seed=6)
        dense_l = random_lower(9, seed=6)
        expected = np.sum((dense_l @ dense_l.T - a.to_dense()) ** 2)
        assert frobenius_distance_sq(_factor(dense_l), a) == pytest.approx(expected, rel=1e-12)

    @pytest.mark.slow
    def test_unbiased(self):
        """20000개 표본 평균은 ‖L Lᵀ − A‖_F² 에 수렴"""
        a = random_spd(8, seed=7, density=0.4)
        l = _factor(np.eye(8))
        exact = frobenius_distance_sq(l, a)
        estimate = monte_carlo_loss(l, a, seed=0, m=20000)
        assert abs(estimate - exact) / exact < 0.02

    def test_monte_carlo_invalid_count(self):
        with pytest.raises(ValueError):
            monte_carlo_loss(_factor(np.eye(2)), SparseCoo.identity(2), seed=0, m=0)


class TestHutchinsonGradient:
    """L 값에 대한 기울기 테스트"""

    def test_matches_finite_difference(self):
        """6x6 에서 중심 차분과 상대 오차 < 1e-6"""
        a = random_spd(6, seed=8, density=0.5)
        l = _factor(random_lower(6, seed=8, density=0.6))
        z = draw_rademacher(6, seed=3)
        loss, grad = hutchinson_loss_and_grad(l, a, z)
        assert loss == hutchinson_loss(l, a, z)

        h = 1e-6
        numeric = np.zeros_like(grad)
        for k in range(l.nnz):
            plus, minus = l.values.copy(), l.values.copy()
            plus[k] += h
            minus[k] -= h
            numeric[k] = (hutchinson_loss(l.with_values(plus), a, z)
                          - hutchinson_loss(l.with_values(minus), a, z)) / (2 * h)
        assert np.linalg.norm(grad - numeric) / np.linalg.norm(grad) < 1e-6

    def test_zero_at_exact_factor(self):
        a = random_spd(7, seed=9)
        l = _factor(np.linalg.cholesky(a.to_dense()))
        grad = hutchinson_loss_grad(l, a, draw_rademacher(7, seed=0))
        assert np.abs(grad).max() < 1e-10

    def test_quadratic_in_z(self):
        """z에 대해 이차: g(x+y) + g(x−y) = 2 g(x) + 2 g(y)"""
        a = random_spd(12, seed=3, density=0.4)
        l = _factor(random_lower(12, seed=3, density=0.4))
        rng = np.random.default_rng(7)
        x, y = rng.standard_normal(12), rng.standard_normal(12)
        lhs = hutchinson_loss_grad(l, a, x + y) + hutchinson_loss_grad(l, a, x - y)
        rhs = 2.0 * hutchinson_loss_grad(l, a, x) + 2.0 * hutchinson_loss_grad(l, a, y)
        assert np.allclose(lhs, rhs, rtol=1e-10, atol=1e-10)

    def test_affine_in_a(self):
        """A에 대해 아핀: g(αA₁ + (1−α)A₂) = α g(A₁) + (1−α) g(A₂)"""
        a1 = random_spd(10, seed=1, density=0.3).to_dense()
        a2 = random_spd(10, seed=2, density=0.3).to_dense()
        l = _factor(random_lower(10, seed=5, density=0.3))
        z = draw_rademacher(10, seed=4)
        alpha = 0.3
        mixed = hutchinson_loss_grad(l, SparseCoo.from_dense(alpha * a1 + (1 - alpha) * a2), z)
        expected = (alpha * hutchinson_loss_grad(l, SparseCoo.from_dense(a1), z)
                    + (1 - alpha) * hutchinson_loss_grad(l, SparseCoo.from_dense(a2), z))
        assert np.allclose(mixed, expected, rtol=1e-10, atol=1e-10)

    def test_grad_length(self):
        l = _factor(random_lower(5, seed=1))
        grad = hutchinson_loss_grad(l, random_spd(5, seed=1), np.ones(5))
        assert grad.shape == (l.nnz,)

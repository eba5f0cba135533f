"""
전처리기 생성 테스트
"""

import numpy as np
import pytest
import scipy.sparse as sp

from src.features import build_graph
from src.gnn import init_correction_model, init_model
from src.precond import (
    IcBreakdownError,
    PrecondKind,
    build_preconditioner,
    dropout_eps_for_reduction,
    export_factor,
    factor_relative_error,
    fill_in_dropout,
    gnn_ic_predict,
    ic0,
    ic0_factor,
    identity_preconditioner,
    jacobi,
    nic_predict,
    relative_errors,
)
from src.sparse import FactorError, LowerFactor, SparseCoo, gen_poisson, read_matrix_market
from tests.conftest import random_spd


def _pattern_residual(factor: LowerFactor, a: SparseCoo) -> float:
    """하삼각 패턴 위 max |(L Lᵀ)_ij − a_ij| / max |a|"""
    m = factor.matrix
    low = sp.csr_matrix((m.values, (m.rows, m.cols)), shape=m.shape)
    product = (low @ low.T).tocsr()
    target = sp.csr_matrix((a.values, (a.rows, a.cols)), shape=a.shape)
    diff = np.abs(np.asarray(product[m.rows, m.cols]).ravel() - np.asarray(target[m.rows, m.cols]).ravel())
    return float(diff.max() / np.abs(a.values).max())


class TestJacobi:
    """Jacobi 전처리기 테스트"""

    def test_apply(self):
        """diag(2, 4), r = [2, 4] → z = [1, 1]"""
        p = jacobi(SparseCoo.from_dense(np.diag([2.0, 4.0])))
        assert p.kind == PrecondKind.JACOBI
        assert p.apply(np.array([2.0, 4.0])).tolist() == [1.0, 1.0]

    def test_nonpositive_diagonal(self):
        with pytest.raises(FactorError):
            jacobi(SparseCoo.from_dense(np.diag([1.0, -1.0])))

    def test_symmetric_scaling_unit_diagonal(self, poisson16_random):
        """D^{-1/2} A D^{-1/2} 의 대각은 1"""
        p = jacobi(poisson16_random)
        s = 1.0 / np.sqrt(p.diagonal)
        scaled = s[:, None] * poisson16_random.to_dense() * s[None, :]
        assert np.allclose(np.diag(scaled), 1.0, rtol=1e-14, atol=0.0)
        r = np.random.default_rng(1).standard_normal(16)
        assert np.allclose(p.apply(r), s * (s * r), rtol=1e-14)

    def test_identity(self):
        p = identity_preconditioner(3)
        r = np.array([1.0, 2.0, 3.0])
        assert p.apply(r).tolist() == r.tolist()
        assert p.nnz == 0


class TestIc0:
    """IC(0) 분해 테스트"""

    def test_diagonal(self):
        """diag(4, 9) → L = diag(2, 3)"""
        factor, shift = ic0_factor(SparseCoo.from_dense(np.diag([4.0, 9.0])))
        assert factor.to_dense().tolist() == [[2.0, 0.0], [0.0, 3.0]]
        assert shift == 0.0

    def test_tridiagonal_is_cholesky(self):
        """fill-in이 없는 삼중대각은 정확한 Cholesky와 일치"""
        n = 20
        dense = 2.0 * np.eye(n) - np.eye(n, k=1) - np.eye(n, k=-1)
        factor, _ = ic0_factor(SparseCoo.from_dense(dense))
        assert np.allclose(factor.to_dense(), np.linalg.cholesky(dense), rtol=1e-13, atol=1e-14)

    @pytest.mark.parametrize("m", [8, 16, 32, pytest.param(64, marks=pytest.mark.slow)])
    def test_poisson_pattern_residual(self, m):
        """2D Poisson n = m²: 패턴 위에서 (L Lᵀ)_ij = a_ij (상대 잔차 < 1e-10)"""
        a = gen_poisson(2, m, coeff_seed=2)
        factor, _ = ic0_factor(a)
        assert factor.nnz == (a.nnz + a.n_rows) // 2
        assert _pattern_residual(factor, a) < 1e-10

    def test_shift_retry(self):
        """작은 음의 피벗은 대각 이동으로 복구"""
        a = SparseCoo.from_dense(np.array([[1.0, 1.0], [1.0, 1.0 - 1e-10]]))
        factor, shift = ic0_factor(a)
        assert shift == pytest.approx(1e-8)
        assert np.all(factor.values[factor.diag_mask] > 0)

    def test_breakdown(self):
        """부정부호 행렬은 재시도 후 IcBreakdownError"""
        a = SparseCoo.from_dense(np.array([[1.0, 2.0], [2.0, 1.0]]))
        with pytest.raises(IcBreakdownError) as exc:
            ic0_factor(a)
        assert exc.value.row == 1

    def test_missing_diagonal(self):
        a = SparseCoo.from_dense(np.array([[0.0, 1.0], [1.0, 2.0]]))
        with pytest.raises(FactorError):
            ic0_factor(a)

    def test_preconditioner_apply(self):
        """적용 결과 z는 L Lᵀ z = r"""
        a = gen_poisson(2, 6)
        p = ic0(a)
        assert p.kind == PrecondKind.IC0
        assert p.p_time >= 0.0
        r = np.random.default_rng(0).standard_normal(a.n_rows)
        z = p.apply(r)
        l = p.factor.to_dense()
        assert np.allclose(l @ (l.T @ z), r, rtol=1e-12, atol=1e-12)


class TestLearnedPreconditioners:
    """NIC / GnnIC 테스트"""

    def test_nic_zero_model(self, zero_gnn, poisson16_random):
        """영 모델 NIC: L = σ I (하삼각 패턴 유지)"""
        p = nic_predict(zero_gnn, poisson16_random)
        sigma = build_graph(poisson16_random).scale
        assert p.kind == PrecondKind.NIC
        assert p.factor.nnz == (poisson16_random.nnz + 16) // 2
        assert np.allclose(p.factor.to_dense(), sigma * np.eye(16))

    def test_gnnic_zero_model(self, zero_gnn, poisson16_random):
        """영 모델 GnnIC: L = L_IC + I (보정은 σ를 곱하지 않음)"""
        p = gnn_ic_predict(zero_gnn, poisson16_random)
        l_ic, _ = ic0_factor(poisson16_random)
        off = ~l_ic.diag_mask
        assert build_graph(poisson16_random).scale != 1.0
        assert np.array_equal(p.factor.values[off], l_ic.values[off])
        assert np.allclose(p.factor.values[l_ic.diag_mask], l_ic.values[l_ic.diag_mask] + 1.0, rtol=1e-15)
        assert np.all(p.factor.values[l_ic.diag_mask] > l_ic.values[l_ic.diag_mask])

    def test_gnnic_correction_start(self, poisson16_random):
        """보정 초기 모델의 GnnIC는 IC(0)에 diag_init만 더함"""
        p = gnn_ic_predict(init_correction_model(seed=1, diag_init=1e-4), poisson16_random)
        l_ic, _ = ic0_factor(poisson16_random)
        assert np.allclose(p.factor.values, l_ic.values + 1e-4 * l_ic.diag_mask, rtol=1e-12, atol=1e-15)

    def test_gnnic_pattern(self, tiny_model):
        a = gen_poisson(2, 5, coeff_seed=1)
        p = gnn_ic_predict(tiny_model, a)
        l_ic, _ = ic0_factor(a)
        assert np.array_equal(p.factor.matrix.rows, l_ic.matrix.rows)
        assert np.array_equal(p.factor.matrix.cols, l_ic.matrix.cols)

    def test_build_requires_model(self, poisson16):
        with pytest.raises(ValueError):
            build_preconditioner(PrecondKind.GNNIC, poisson16)
        assert build_preconditioner("none", poisson16).kind == PrecondKind.NONE
        assert build_preconditioner("jacobi", poisson16).kind == PrecondKind.JACOBI


class TestOperatorDefiniteness:
    """P⁻¹ 연산자의 대칭 양의 정부호 테스트 (밀집 고윳값, n <= 64)"""

    @pytest.fixture
    def mild_model(self):
        """출력층을 0.1배로 줄여 비대각이 대각보다 작은 모델"""
        model = init_model(seed=0)
        model.params["block2.edge.W2"] *= 0.1
        model.params["block2.edge.b2"] *= 0.1
        return model

    @staticmethod
    def _inverse_operator(p, n: int) -> np.ndarray:
        return np.column_stack([p.apply(e) for e in np.eye(n)])

    def _assert_spd(self, p, n: int):
        op = self._inverse_operator(p, n)
        assert np.linalg.norm(op - op.T) <= 1e-10 * np.linalg.norm(op)
        assert np.linalg.eigvalsh(0.5 * (op + op.T)).min() > 0.0
        l = p.factor.to_dense()
        assert np.linalg.eigvalsh(l @ l.T).min() > 0.0

    @pytest.mark.parametrize("kind", ["ic0", "nic", "gnnic"])
    @pytest.mark.parametrize("m", [4, 8])
    def test_poisson(self, kind, m, mild_model):
        a = gen_poisson(2, m, coeff_seed=m)
        self._assert_spd(build_preconditioner(kind, a, model=mild_model), a.n_rows)

    @pytest.mark.parametrize("kind", ["ic0", "nic", "gnnic"])
    def test_random_matrix(self, kind, mild_model):
        """Poisson이 아닌 랜덤 SPD 행렬"""
        a = random_spd(40, seed=12, density=0.15)
        self._assert_spd(build_preconditioner(kind, a, model=mild_model), 40)


class TestFillInDropout:
    """fill-in dropout 테스트"""

    def test_zero_eps_unchanged(self):
        p = ic0(gen_poisson(2, 6, coeff_seed=1))
        dropped = fill_in_dropout(p, 0.0)
        assert dropped.nnz == p.nnz
        assert np.array_equal(dropped.factor.values, p.factor.values)

    def test_monotone_and_diagonal_kept(self):
        """eps가 커질수록 nnz 감소, 대각은 항상 유지"""
        p = ic0(gen_poisson(2, 6, coeff_seed=1))
        counts = [fill_in_dropout(p, eps).nnz for eps in (0.0, 0.05, 0.2, 0.5, 1e6)]
        assert counts == sorted(counts, reverse=True)
        assert counts[-1] == 36
        assert fill_in_dropout(p, 1e6).info["nnz_after"] == 36

    def test_idempotent(self):
        p = ic0(gen_poisson(2, 6, coeff_seed=4))
        once = fill_in_dropout(p, 0.3)
        twice = fill_in_dropout(once, 0.3)
        assert np.array_equal(once.factor.values, twice.factor.values)
        assert np.array_equal(once.factor.matrix.rows, twice.factor.matrix.rows)

    @pytest.mark.parametrize("fraction", [0.05, 0.2, 0.35])
    def test_eps_for_reduction(self, fraction):
        """목표 eps에서 감소율 >= fraction, 바로 아래 eps에서는 미달"""
        p = ic0(gen_poisson(2, 8, coeff_seed=3))
        eps = dropout_eps_for_reduction(p, fraction)
        reduction = (p.nnz - fill_in_dropout(p, eps).nnz) / p.nnz
        assert reduction >= fraction
        below = (p.nnz - fill_in_dropout(p, np.nextafter(eps, 0.0)).nnz) / p.nnz
        assert below < fraction

    def test_eps_for_zero_reduction(self, poisson16):
        assert dropout_eps_for_reduction(ic0(poisson16), 0.0) == 0.0

    def test_eps_for_reduction_invalid(self, poisson16):
        """도달 불가 / 범위 밖 / 인자 없음은 ValueError"""
        p = ic0(poisson16)
        with pytest.raises(ValueError):
            dropout_eps_for_reduction(p, 0.9)
        with pytest.raises(ValueError):
            dropout_eps_for_reduction(p, 1.5)
        with pytest.raises(ValueError):
            dropout_eps_for_reduction(jacobi(poisson16), 0.2)

    @pytest.mark.slow
    @pytest.mark.parametrize("coeff_seed", [None, 0, 1])
    def test_poisson_4096_target_reduction(self, coeff_seed):
        """2D Poisson n=4096: 목표 eps는 nnz를 20% 이상 줄이고 PCG는 수렴"""
        from src.krylov import SolveConfig, pcg

        a = gen_poisson(2, 64, coeff_seed=coeff_seed)
        p = ic0(a)
        eps = dropout_eps_for_reduction(p, 0.2)
        dropped = fill_in_dropout(p, eps)
        assert (p.nnz - dropped.nnz) / p.nnz >= 0.2
        assert dropped.nnz < fill_in_dropout(p, 0.0).nnz
        b = np.random.default_rng(0).standard_normal(a.n_rows)
        _, report = pcg(a, b, dropped, SolveConfig(rel_tol=1e-6))
        assert report.converged

    def test_invalid(self, poisson16):
        with pytest.raises(ValueError):
            fill_in_dropout(jacobi(poisson16), 0.1)
        with pytest.raises(ValueError):
            fill_in_dropout(ic0(poisson16), -1.0)


class TestRelativeErrors:
    """인자 상대 오차 테스트"""

    def test_identical(self, poisson16):
        factor, _ = ic0_factor(poisson16)
        assert np.all(relative_errors(factor, factor) == 0.0)

    def test_scaled(self, poisson16):
        """1.1배 → 모든 원소 0.1"""
        factor, _ = ic0_factor(poisson16)
        errors = relative_errors(factor.with_values(factor.values * 1.1), factor)
        assert np.allclose(errors, 0.1)

    def test_pattern_mismatch(self, poisson16):
        factor, _ = ic0_factor(poisson16)
        with pytest.raises(FactorError):
            relative_errors(LowerFactor(SparseCoo.identity(16)), factor)

    def test_diag_offdiag_split(self, poisson16):
        factor, _ = ic0_factor(poisson16)
        values = factor.values.copy()
        values[factor.diag_mask] *= 1.2
        diag, offdiag = factor_relative_error(factor.with_values(values), factor)
        assert diag["count"] == 16
        assert diag["mean"] == pytest.approx(0.2)
        assert offdiag["count"] == 24
        assert offdiag["max"] == 0.0


class TestExportFactor:
    """인자 내보내기 테스트"""

    def test_round_trip(self, tmp_path, poisson16_random):
        p = ic0(poisson16_random)
        path = export_factor(p, tmp_path / "l.mtx")
        back = read_matrix_market(path)
        assert np.array_equal(back.values, p.factor.values)

    def test_no_factor(self, tmp_path, poisson16):
        with pytest.raises(ValueError):
            export_factor(jacobi(poisson16), tmp_path / "d.mtx")

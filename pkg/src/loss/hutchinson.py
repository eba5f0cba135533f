"""
Hutchinson 트레이스 손실 모듈

‖L Lᵀ z − A z‖² (Rademacher z, 단일 샘플)를 형식 변환 없이
index_select / scatter 연산만으로 계산하고, L 값에 대한 정확한 기울기를 제공합니다.
"""

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from src.sparse import (
    LowerFactor,
    SparseCoo,
    SparseFormatError,
    index_select,
    scatter_sum,
)

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class RademacherVector:
    """±1 성분 랜덤 벡터와 재현용 시드 정보"""

    values: np.ndarray
    seed: int
    step: int = 0
    sample: int = 0

    @property
    def n(self) -> int:
        return int(self.values.shape[0])


def draw_rademacher(n: int, seed: int, step: int = 0, sample: int = 0) -> RademacherVector:
    """
    카운터 기반 Philox 생성기로 Rademacher 벡터 생성

    키는 seed, 카운터는 (step, sample)을 상위 워드에 배치하여
    스텝/샘플마다 겹치지 않는 난수열을 사용합니다.
    """
    counter = (int(step) << 128) | (int(sample) << 64)
    rng = np.random.Generator(np.random.Philox(key=int(seed), counter=counter))
    values = rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0
    return RademacherVector(values=values, seed=int(seed), step=int(step), sample=int(sample))


def _check_length(z: np.ndarray, n: int) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 1 or z.shape[0] != n:
        raise SparseFormatError(f"차원 불일치: 벡터 길이 {z.shape}, 기대 {n}")
    return z


def coo_matvec_scatter(a: SparseCoo, z: np.ndarray) -> np.ndarray:
    """
    A z = scatter(values · z[col], row)
    """
    z = _check_length(z, a.n_cols)
    return scatter_sum(a.values * index_select(z, a.cols), a.rows, a.n_rows)


def llt_matvec_scatter(l: LowerFactor, z: np.ndarray) -> np.ndarray:
    """
    L (Lᵀ z)를 두 번의 select/scatter로 계산

    1) t = scatter(values · z[row], col)   (= Lᵀ z)
    2) res = scatter(values · t[col], row) (= L t)
    """
    m = l.matrix
    z = _check_length(z, m.n_rows)
    t = scatter_sum(m.values * index_select(z, m.rows), m.cols, m.n_rows)
    return scatter_sum(m.values * index_select(t, m.cols), m.rows, m.n_rows)


def _as_values(z) -> np.ndarray:
    return z.values if isinstance(z, RademacherVector) else np.asarray(z, dtype=np.float64)


def hutchinson_loss(l: LowerFactor, a: SparseCoo, z) -> float:
    """‖L Lᵀ z − A z‖²"""
    z = _as_values(z)
    residual = llt_matvec_scatter(l, z) - coo_matvec_scatter(a, z)
    return float(residual @ residual)


def hutchinson_loss_and_grad(l: LowerFactor, a: SparseCoo, z):
    """
    손실과 L의 저장 값에 대한 기울기

    r = L t − A z, t = Lᵀ z, u = Lᵀ r 일 때
    ∂/∂L_ij = 2 (r_i t_j + z_i u_j)

    Returns:
        (loss, grad) - grad 길이는 nnz(L)
    """
    m = l.matrix
    z = _check_length(_as_values(z), m.n_rows)
    t = scatter_sum(m.values * index_select(z, m.rows), m.cols, m.n_rows)
    residual = scatter_sum(m.values * index_select(t, m.cols), m.rows, m.n_rows) - coo_matvec_scatter(a, z)
    u = scatter_sum(m.values * index_select(residual, m.rows), m.cols, m.n_rows)
    grad = 2.0 * (index_select(residual, m.rows) * index_select(t, m.cols)
                  + index_select(z, m.rows) * index_select(u, m.cols))
    return float(residual @ residual), grad


def hutchinson_loss_grad(l: LowerFactor, a: SparseCoo, z) -> np.ndarray:
    """hutchinson_loss의 L 값에 대한 기울기"""
    _, grad = hutchinson_loss_and_grad(l, a, z)
    return grad


def _to_scipy(m: SparseCoo) -> sp.csr_matrix:
    return sp.csr_matrix((m.values, (m.rows, m.cols)), shape=m.shape)


def frobenius_distance_sq(l: LowerFactor, a: SparseCoo) -> float:
    """정확한 ‖L Lᵀ − A‖_F² (진단용, scipy 희소 곱)"""
    low = _to_scipy(l.matrix)
    diff = (low @ low.T - _to_scipy(a)).tocoo()
    return float(np.sum(diff.data ** 2))


def monte_carlo_loss(l: LowerFactor, a: SparseCoo, seed: int, m: int) -> float:
    """m개의 단일 샘플 Hutchinson 손실 평균 (진단용, 학습 경로 아님)"""
    if m < 1:
        raise ValueError(f"샘플 수는 1 이상이어야 합니다: {m}")
    total = 0.0
    for step in range(m):
        total += hutchinson_loss(l, a, draw_rademacher(l.n, seed, step=step))
    return total / m

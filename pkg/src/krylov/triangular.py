"""
희소 삼각 해법 모듈

전진 대입 (L y = b)과 후진 대입 (U x = y). 행 순서대로 순차 계산합니다.
"""

import numpy as np

from src.sparse import SparseCsr, SparseFormatError
from src.sparse.kernels import backward_substitution_kernel, forward_substitution_kernel


class TriangularSolveError(ZeroDivisionError):
    """대각 원소가 0이거나 누락된 삼각 행렬"""

    def __init__(self, row: int, kind: str = "lower"):
        self.row = row
        super().__init__(f"{kind} 삼각 해법 실패: 행 {row}의 대각 원소가 0이거나 없습니다")


def _check_rhs(m: SparseCsr, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != m.n_rows or m.n_rows != m.n_cols:
        raise SparseFormatError(f"차원 불일치: 행렬 {m.n_rows}x{m.n_cols}, 벡터 {b.shape}")
    return b


def tri_solve_lower(l: SparseCsr, b: np.ndarray) -> np.ndarray:
    """
    L x = b (하삼각 CSR, 행 내 열 오름차순)

    Raises:
        TriangularSolveError: 대각 0 또는 누락 (행 번호 포함)
    """
    b = _check_rhs(l, b)
    x, bad_row = forward_substitution_kernel(l.row_ptr, l.cols, l.values, b)
    if bad_row >= 0:
        raise TriangularSolveError(int(bad_row), "lower")
    return x


def tri_solve_upper(u: SparseCsr, b: np.ndarray) -> np.ndarray:
    """
    U x = b (상삼각 CSR, 행 내 열 오름차순)

    Raises:
        TriangularSolveError: 대각 0 또는 누락 (행 번호 포함)
    """
    b = _check_rhs(u, b)
    x, bad_row = backward_substitution_kernel(u.row_ptr, u.cols, u.values, b)
    if bad_row >= 0:
        raise TriangularSolveError(int(bad_row), "upper")
    return x

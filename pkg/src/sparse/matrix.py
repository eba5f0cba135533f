"""
희소 행렬 저장 모듈

COO(좌표) / CSR(압축 행) 형식과 하삼각 인자(LowerFactor),
그리고 형식 변환 및 기본 연산을 제공합니다.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .kernels import csr_matvec_kernel

logger = logging.getLogger(__name__)

INDEX_DTYPE = np.int64
VALUE_DTYPE = np.float64


class SparseFormatError(ValueError):
    """희소 행렬 형식 / 차원 관련 오류"""
    pass


class FactorError(ValueError):
    """하삼각 인자 관련 오류 (대각 양수성, 패턴 불일치)"""
    pass


def _frozen(array: np.ndarray, dtype) -> np.ndarray:
    out = np.array(array, dtype=dtype, copy=True).reshape(-1)
    out.flags.writeable = False
    return out


@dataclass(frozen=True, eq=False)
class SparseCoo:
    """
    좌표 형식 희소 행렬

    (row, col) 사전식 정렬, 중복 없음. 생성 후 변경 불가.
    """

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rows", _frozen(self.rows, INDEX_DTYPE))
        object.__setattr__(self, "cols", _frozen(self.cols, INDEX_DTYPE))
        object.__setattr__(self, "values", _frozen(self.values, VALUE_DTYPE))
        self._validate()

    def _validate(self) -> None:
        if self.n_rows < 0 or self.n_cols < 0:
            raise SparseFormatError(f"잘못된 크기: {self.n_rows}x{self.n_cols}")
        nnz = self.rows.shape[0]
        if self.cols.shape[0] != nnz or self.values.shape[0] != nnz:
            raise SparseFormatError(
                f"rows/cols/values 길이 불일치: {nnz}, {self.cols.shape[0]}, {self.values.shape[0]}"
            )
        if nnz == 0:
            return
        if self.rows.min() < 0 or self.rows.max() >= self.n_rows:
            raise SparseFormatError(f"행 인덱스 범위 초과 (n_rows={self.n_rows})")
        if self.cols.min() < 0 or self.cols.max() >= self.n_cols:
            raise SparseFormatError(f"열 인덱스 범위 초과 (n_cols={self.n_cols})")
        keys = self.rows * max(self.n_cols, 1) + self.cols
        steps = np.diff(keys)
        if np.any(steps == 0):
            first = int(np.flatnonzero(steps == 0)[0])
            raise SparseFormatError(
                f"중복 항목: ({self.rows[first]}, {self.cols[first]})"
            )
        if np.any(steps < 0):
            raise SparseFormatError("항목이 (row, col) 순으로 정렬되어 있지 않습니다")

    @classmethod
    def from_triples(
        cls,
        n_rows: int,
        n_cols: int,
        rows,
        cols,
        values,
    ) -> "SparseCoo":
        """
        정렬되지 않은 삼중항으로부터 생성 (정렬 수행, 중복은 오류)

        Raises:
            SparseFormatError: 중복 또는 범위 초과 인덱스
        """
        rows = np.asarray(rows, dtype=INDEX_DTYPE).reshape(-1)
        cols = np.asarray(cols, dtype=INDEX_DTYPE).reshape(-1)
        values = np.asarray(values, dtype=VALUE_DTYPE).reshape(-1)
        order = np.lexsort((cols, rows))
        return cls(n_rows, n_cols, rows[order], cols[order], values[order])

    @classmethod
    def from_dense(cls, dense: np.ndarray) -> "SparseCoo":
        """밀집 행렬의 0이 아닌 원소로 생성 (테스트/오라클용)"""
        dense = np.asarray(dense, dtype=VALUE_DTYPE)
        rows, cols = np.nonzero(dense)
        return cls(dense.shape[0], dense.shape[1], rows, cols, dense[rows, cols])

    @classmethod
    def identity(cls, n: int) -> "SparseCoo":
        idx = np.arange(n, dtype=INDEX_DTYPE)
        return cls(n, n, idx, idx, np.ones(n))

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.n_rows, self.n_cols

    def with_values(self, values: np.ndarray) -> "SparseCoo":
        """같은 패턴, 새 값"""
        values = np.asarray(values, dtype=VALUE_DTYPE).reshape(-1)
        if values.shape[0] != self.nnz:
            raise SparseFormatError(f"값 길이 불일치: {values.shape[0]} != nnz {self.nnz}")
        return SparseCoo(self.n_rows, self.n_cols, self.rows, self.cols, values)

    def diagonal(self) -> np.ndarray:
        """대각 원소 (저장되지 않은 대각은 0)"""
        diag = np.zeros(min(self.n_rows, self.n_cols))
        mask = self.rows == self.cols
        diag[self.rows[mask]] = self.values[mask]
        return diag

    def has_full_diagonal(self) -> bool:
        mask = self.rows == self.cols
        return int(mask.sum()) == min(self.n_rows, self.n_cols)

    def is_symmetric(self) -> bool:
        """패턴과 값이 정확히 대칭인지 확인"""
        if self.n_rows != self.n_cols:
            return False
        t = transpose(self)
        return (
            np.array_equal(t.rows, self.rows)
            and np.array_equal(t.cols, self.cols)
            and np.array_equal(t.values, self.values)
        )

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols))
        dense[self.rows, self.cols] = self.values
        return dense

    def __repr__(self) -> str:
        return f"SparseCoo({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


@dataclass(frozen=True, eq=False)
class SparseCsr:
    """압축 행 형식 희소 행렬. 행렬-벡터 곱과 삼각 해법의 실행 형식"""

    n_rows: int
    n_cols: int
    row_ptr: np.ndarray
    cols: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "row_ptr", _frozen(self.row_ptr, INDEX_DTYPE))
        object.__setattr__(self, "cols", _frozen(self.cols, INDEX_DTYPE))
        object.__setattr__(self, "values", _frozen(self.values, VALUE_DTYPE))
        if self.row_ptr.shape[0] != self.n_rows + 1:
            raise SparseFormatError(f"row_ptr 길이가 {self.n_rows + 1}이 아닙니다")
        if self.row_ptr[0] != 0 or self.row_ptr[-1] != self.cols.shape[0]:
            raise SparseFormatError("row_ptr[0] == 0, row_ptr[-1] == nnz 조건 위반")
        if np.any(np.diff(self.row_ptr) < 0):
            raise SparseFormatError("row_ptr가 비감소가 아닙니다")
        if self.values.shape[0] != self.cols.shape[0]:
            raise SparseFormatError("cols/values 길이 불일치")

    @property
    def nnz(self) -> int:
        return int(self.values.shape[0])

    def row_indices(self) -> np.ndarray:
        """각 항목의 행 인덱스 (COO rows)"""
        return np.repeat(np.arange(self.n_rows, dtype=INDEX_DTYPE), np.diff(self.row_ptr))

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.n_rows, self.n_cols))
        dense[self.row_indices(), self.cols] = self.values
        return dense

    def __repr__(self) -> str:
        return f"SparseCsr({self.n_rows}x{self.n_cols}, nnz={self.nnz})"


class LowerFactor:
    """
    하삼각 인자 L (P = L Lᵀ)

    모든 항목이 row >= col 이고, 모든 대각 원소가 존재하며 양수여야 합니다.
    """

    def __init__(self, matrix: SparseCoo):
        """
        Args:
            matrix: 하삼각 COO 행렬

        Raises:
            FactorError: 상삼각 항목, 누락되었거나 양수가 아닌 대각
        """
        if matrix.n_rows != matrix.n_cols:
            raise FactorError(f"정방 행렬이 아닙니다: {matrix.shape}")
        if np.any(matrix.rows < matrix.cols):
            raise FactorError("상삼각 항목이 포함되어 있습니다")
        diag_mask = matrix.rows == matrix.cols
        if int(diag_mask.sum()) != matrix.n_rows:
            missing = np.setdiff1d(np.arange(matrix.n_rows), matrix.rows[diag_mask])
            raise FactorError(f"대각 원소 누락: 행 {int(missing[0])}")
        bad = np.flatnonzero(~(matrix.values[diag_mask] > 0.0))
        if bad.size:
            raise FactorError(f"양수가 아닌 대각 원소: 행 {int(matrix.rows[diag_mask][bad[0]])}")
        self.matrix = matrix
        self.diag_mask = diag_mask

    @property
    def n(self) -> int:
        return self.matrix.n_rows

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    @property
    def values(self) -> np.ndarray:
        return self.matrix.values

    def with_values(self, values: np.ndarray) -> "LowerFactor":
        return LowerFactor(self.matrix.with_values(values))

    def to_dense(self) -> np.ndarray:
        return self.matrix.to_dense()

    def __repr__(self) -> str:
        return f"LowerFactor(n={self.n}, nnz={self.nnz})"


def coo_to_csr(m: SparseCoo) -> SparseCsr:
    """
    COO → CSR 변환

    Raises:
        SparseFormatError: 불변식 위반 (중복 / 범위 초과)
    """
    m._validate()
    counts = np.bincount(m.rows, minlength=m.n_rows)
    row_ptr = np.zeros(m.n_rows + 1, dtype=INDEX_DTYPE)
    np.cumsum(counts, out=row_ptr[1:])
    return SparseCsr(m.n_rows, m.n_cols, row_ptr, m.cols, m.values)


def csr_to_coo(c: SparseCsr) -> SparseCoo:
    """CSR → COO 변환"""
    return SparseCoo(c.n_rows, c.n_cols, c.row_indices(), c.cols, c.values)


def csr_matvec(a: SparseCsr, x: np.ndarray) -> np.ndarray:
    """
    y = A x

    Raises:
        SparseFormatError: 차원 불일치
    """
    x = np.asarray(x, dtype=VALUE_DTYPE)
    if x.ndim != 1 or x.shape[0] != a.n_cols:
        raise SparseFormatError(f"차원 불일치: A는 {a.n_rows}x{a.n_cols}, x 길이 {x.shape}")
    return csr_matvec_kernel(a.row_ptr, a.cols, a.values, x)


def transpose(a: SparseCoo) -> SparseCoo:
    """정렬된 전치 행렬"""
    order = np.lexsort((a.rows, a.cols))
    return SparseCoo(a.n_cols, a.n_rows, a.cols[order], a.rows[order], a.values[order])


def permute_symmetric(a: SparseCoo, perm: np.ndarray) -> SparseCoo:
    """
    P A Pᵀ 계산: 원래 노드 i는 새 노드 perm[i]가 됨
    """
    perm = np.asarray(perm, dtype=INDEX_DTYPE)
    return SparseCoo.from_triples(a.n_rows, a.n_cols, perm[a.rows], perm[a.cols], a.values)


def lower_triangle(a: SparseCoo) -> SparseCoo:
    """
    대칭 행렬의 하삼각(대각 포함) 부분

    Raises:
        SparseFormatError: 비대칭 입력
    """
    if not a.is_symmetric():
        raise SparseFormatError("lower_triangle은 대칭 행렬만 받습니다")
    mask = a.rows >= a.cols
    return SparseCoo(a.n_rows, a.n_cols, a.rows[mask], a.cols[mask], a.values[mask])


def scale_by_std(a: SparseCoo) -> Tuple[SparseCoo, float]:
    """
    0이 아닌 값들을 모표준편차로 나눔

    Returns:
        (스케일된 행렬, σ). σ = 0 (상수값 행렬)이면 원본과 1.0
    """
    if a.nnz < 2:
        return a, 1.0
    sigma = float(np.std(a.values))
    if sigma == 0.0 or not np.isfinite(sigma):
        logger.debug("표준편차가 0이므로 스케일링 생략")
        return a, 1.0
    return a.with_values(a.values / sigma), sigma

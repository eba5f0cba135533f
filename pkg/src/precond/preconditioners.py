"""
전처리기 생성 모듈

None(항등), Jacobi, IC(0), GNN 직접 예측(NIC), IC(0) 학습 보정(GnnIC),
그리고 fill-in dropout 후처리를 제공합니다.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np

from src.features import GraphSample, build_graph
from src.gnn import GnnModel, assemble_factor, gnn_forward
from src.sparse import (
    FactorError,
    LowerFactor,
    SparseCoo,
    SparseCsr,
    coo_to_csr,
    lower_triangle,
    write_matrix_market,
    transpose,
)
from src.sparse.kernels import ic0_kernel

logger = logging.getLogger(__name__)

IC_SHIFT_BASE = 1e-8
IC_MAX_RETRIES = 3


class IcBreakdownError(ArithmeticError):
    """IC(0) 피벗 붕괴 (대각 이동 재시도 후에도 실패)"""

    def __init__(self, row: int, shift: float):
        self.row = row
        self.shift = shift
        super().__init__(f"IC(0) 분해 실패: 행 {row}의 피벗이 양수가 아닙니다 (마지막 shift={shift:.3g})")


class PrecondKind(str, Enum):
    """전처리기 종류"""

    NONE = "none"
    JACOBI = "jacobi"
    IC0 = "ic0"
    NIC = "nic"
    GNNIC = "gnnic"


FACTOR_KINDS = (PrecondKind.IC0, PrecondKind.NIC, PrecondKind.GNNIC)


@dataclass(frozen=True, eq=False)
class Preconditioner:
    """
    생성된 전처리기 (불변)

    Jacobi는 diagonal, 인자형은 factor와 실행용 CSR(L, Lᵀ)을 가집니다.
    """

    kind: PrecondKind
    n: int
    p_time: float = 0.0
    diagonal: Optional[np.ndarray] = None
    factor: Optional[LowerFactor] = None
    lower_csr: Optional[SparseCsr] = None
    upper_csr: Optional[SparseCsr] = None
    info: Dict[str, Any] = field(default_factory=dict)

    @property
    def has_factor(self) -> bool:
        return self.factor is not None

    def apply(self, r: np.ndarray) -> np.ndarray:
        """z = P⁻¹ r (대각 나눗셈 또는 두 번의 삼각 해법)"""
        from src.krylov.solvers import apply_preconditioner

        return apply_preconditioner(self, r)

    @property
    def nnz(self) -> int:
        if self.factor is not None:
            return self.factor.nnz
        if self.diagonal is not None:
            return int(self.diagonal.shape[0])
        return 0

    @classmethod
    def from_factor(
        cls,
        kind: PrecondKind,
        factor: LowerFactor,
        p_time: float = 0.0,
        info: Optional[Dict[str, Any]] = None,
    ) -> "Preconditioner":
        return cls(
            kind=kind,
            n=factor.n,
            p_time=p_time,
            factor=factor,
            lower_csr=coo_to_csr(factor.matrix),
            upper_csr=coo_to_csr(transpose(factor.matrix)),
            info=dict(info or {}),
        )

    def __repr__(self) -> str:
        return f"Preconditioner(kind={self.kind.value}, n={self.n}, nnz={self.nnz}, p_time={self.p_time:.4g}s)"


def identity_preconditioner(n: int) -> Preconditioner:
    """전처리 없음 (M = I)"""
    return Preconditioner(kind=PrecondKind.NONE, n=n)


def jacobi(a: SparseCoo) -> Preconditioner:
    """
    Jacobi 전처리기: d_i = a_ii, 적용은 r / d

    Raises:
        FactorError: 양수가 아닌 대각
    """
    start = time.perf_counter()
    diag = a.diagonal()
    bad = np.flatnonzero(~(diag > 0.0))
    if bad.size:
        raise FactorError(f"Jacobi: 행 {int(bad[0])}의 대각 원소가 양수가 아닙니다")
    diag.flags.writeable = False
    return Preconditioner(
        kind=PrecondKind.JACOBI,
        n=a.n_rows,
        p_time=time.perf_counter() - start,
        diagonal=diag,
    )


def ic0_factor(
    a: SparseCoo,
    max_retries: int = IC_MAX_RETRIES,
    shift_base: float = IC_SHIFT_BASE,
) -> Tuple[LowerFactor, float]:
    """
    IC(0) 분해: A의 하삼각 패턴 위 L, 패턴 위에서 (L Lᵀ)_ij = a_ij

    피벗이 양수가 아니면 A + αI 로 재시도 (α는 shift_base·max|a_ii|에서 시작해 2배씩, 최대 max_retries회).

    Returns:
        (L, 적용된 shift)

    Raises:
        FactorError: 대각 누락
        IcBreakdownError: 재시도 후에도 붕괴
    """
    lower = lower_triangle(a)
    if not lower.has_full_diagonal():
        raise FactorError("IC(0): 모든 대각 원소가 필요합니다")
    csr = coo_to_csr(lower)

    values, fail_row = ic0_kernel(csr.row_ptr, csr.cols, csr.values.copy(), 0.0)
    shift = 0.0
    if fail_row >= 0:
        alpha = shift_base * float(np.max(np.abs(a.diagonal())))
        for attempt in range(max_retries):
            shift = alpha * (2.0 ** attempt)
            logger.warning(
                f"IC(0) 피벗 붕괴 (행 {int(fail_row)}), 대각 이동 재시도 {attempt + 1}/{max_retries}: shift={shift:.3g}"
            )
            values, fail_row = ic0_kernel(csr.row_ptr, csr.cols, csr.values.copy(), shift)
            if fail_row < 0:
                break
        else:
            raise IcBreakdownError(int(fail_row), shift)

    return LowerFactor(lower.with_values(values)), shift


def ic0(a: SparseCoo) -> Preconditioner:
    """IC(0) 전처리기"""
    start = time.perf_counter()
    factor, shift = ic0_factor(a)
    p = Preconditioner.from_factor(PrecondKind.IC0, factor, info={"shift": shift})
    return replace(p, p_time=time.perf_counter() - start)


def gnn_ic_factor(l_ic: LowerFactor, g: GraphSample, edge_values: np.ndarray) -> LowerFactor:
    """
    L = L_IC + GNN 출력 (대각 출력은 exp(·/2) > 0 이므로 L_IC 대각보다 큼)

    보정은 σ로 되돌리지 않습니다. 0 모델은 L_IC + I를 줍니다.

    Raises:
        FactorError: 패턴 또는 길이 불일치
    """
    if not (np.array_equal(l_ic.matrix.rows, g.lower.rows) and np.array_equal(l_ic.matrix.cols, g.lower.cols)):
        raise FactorError("IC(0) 인자와 그래프의 패턴이 다릅니다")
    correction = np.asarray(edge_values, dtype=np.float64).reshape(-1)
    if correction.shape[0] != l_ic.nnz:
        raise FactorError(f"보정 길이 불일치: {correction.shape[0]} != {l_ic.nnz}")
    return l_ic.with_values(l_ic.values + correction)


def nic_predict(model: GnnModel, a: SparseCoo) -> Preconditioner:
    """GNN 직접 예측 L = GNN(A) (추론 시간이 p_time)"""
    start = time.perf_counter()
    g = build_graph(a)
    factor = assemble_factor(g, gnn_forward(model, g))
    p = Preconditioner.from_factor(PrecondKind.NIC, factor)
    return replace(p, p_time=time.perf_counter() - start)


def gnn_ic_predict(model: GnnModel, a: SparseCoo) -> Preconditioner:
    """IC(0) 학습 보정 L = L_IC + GNN(A) (p_time은 IC(0) + 추론)"""
    start = time.perf_counter()
    l_ic, shift = ic0_factor(a)
    g = build_graph(a)
    factor = gnn_ic_factor(l_ic, g, gnn_forward(model, g))
    p = Preconditioner.from_factor(PrecondKind.GNNIC, factor, info={"shift": shift})
    return replace(p, p_time=time.perf_counter() - start)


def fill_in_dropout(p: Preconditioner, eps: float) -> Preconditioner:
    """
    |v| <= eps 인 비대각 원소 제거 (대각은 유지)

    Raises:
        ValueError: 인자형 전처리기가 아니거나 eps < 0
    """
    if not p.has_factor:
        raise ValueError(f"fill-in dropout은 인자형 전처리기에만 적용됩니다: {p.kind.value}")
    if eps < 0:
        raise ValueError(f"eps는 0 이상이어야 합니다: {eps}")

    start = time.perf_counter()
    m = p.factor.matrix
    keep = p.factor.diag_mask | (np.abs(m.values) > eps)
    factor = LowerFactor(SparseCoo(m.n_rows, m.n_cols, m.rows[keep], m.cols[keep], m.values[keep]))
    info = dict(p.info)
    info.update({"dropout_eps": float(eps), "nnz_before": p.factor.nnz, "nnz_after": factor.nnz})
    dropped = Preconditioner.from_factor(p.kind, factor, info=info)
    elapsed = time.perf_counter() - start
    logger.debug(f"fill-in dropout eps={eps}: nnz {p.factor.nnz} → {factor.nnz}")
    return replace(dropped, p_time=p.p_time + elapsed)


def dropout_eps_for_reduction(p: Preconditioner, fraction: float) -> float:
    """
    nnz 감소율이 fraction 이상이 되는 가장 작은 dropout eps

    비대각 |v|를 오름차순 정렬한 뒤 k = ⌈fraction·nnz⌉ 번째 값.

    Raises:
        ValueError: 인자형이 아니거나 fraction이 [0, 1] 밖이거나 비대각을 모두 지워도 도달 불가
    """
    if not p.has_factor:
        raise ValueError(f"인자형 전처리기가 아닙니다: {p.kind.value}")
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction은 [0, 1] 범위여야 합니다: {fraction}")
    offdiag = np.sort(np.abs(p.factor.values[~p.factor.diag_mask]))
    k = int(np.ceil(fraction * p.factor.nnz))
    if k == 0:
        return 0.0
    if k > offdiag.shape[0]:
        raise ValueError(f"비대각 {offdiag.shape[0]}개로는 nnz {fraction:.0%} 감소에 도달할 수 없습니다")
    return float(offdiag[k - 1])


def build_preconditioner(
    kind: PrecondKind,
    a: SparseCoo,
    model: Optional[GnnModel] = None,
) -> Preconditioner:
    """
    종류별 전처리기 생성

    Raises:
        ValueError: 학습 방식에 모델이 없는 경우
    """
    kind = PrecondKind(kind)
    if kind == PrecondKind.NONE:
        return identity_preconditioner(a.n_rows)
    if kind == PrecondKind.JACOBI:
        return jacobi(a)
    if kind == PrecondKind.IC0:
        return ic0(a)
    if model is None:
        raise ValueError(f"{kind.value} 전처리기에는 학습된 모델이 필요합니다")
    if kind == PrecondKind.NIC:
        return nic_predict(model, a)
    return gnn_ic_predict(model, a)


def export_factor(p: Preconditioner, path) -> Path:
    """인자를 Matrix Market(general)으로 내보내기"""
    if not p.has_factor:
        raise ValueError(f"내보낼 인자가 없습니다: {p.kind.value}")
    return write_matrix_market(
        p.factor.matrix,
        path,
        symmetric=False,
        comment=f"{p.kind.value} lower factor, nnz={p.factor.nnz}",
    )

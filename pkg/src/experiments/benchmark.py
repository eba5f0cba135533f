"""
전처리기 벤치마크 모듈

방법 하나를 행렬 하나에 대해 워밍업 실행(버림) 후 repeats회 반복 실행하여
반복 수와 P-time / CG-time / Total-time 평균을 구합니다.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from tqdm import tqdm

from src.gnn import GnnModel, GnnNumericError
from src.krylov import SolveConfig, TriangularSolveError, pcg
from src.precond import IcBreakdownError, PrecondKind, build_preconditioner, fill_in_dropout
from src.sparse import FactorError, SparseCoo

logger = logging.getLogger(__name__)

METHOD_ORDER = [k.value for k in PrecondKind]
FAILURES = (IcBreakdownError, FactorError, GnnNumericError, TriangularSolveError)


@dataclass
class BenchmarkSettings:
    """반복 측정 설정"""

    rel_tol: float = 1e-6
    max_iters: Optional[int] = None
    warmup: int = 1
    repeats: int = 10

    def __post_init__(self):
        if self.warmup < 0 or self.repeats < 1:
            raise ValueError(f"warmup >= 0, repeats >= 1 이어야 합니다: {self.warmup}, {self.repeats}")

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "BenchmarkSettings":
        config = config or {}
        return cls(**{k: config[k] for k in cls.__dataclass_fields__ if k in config})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def solve_config(self) -> SolveConfig:
        return SolveConfig(rel_tol=self.rel_tol, max_iters=self.max_iters, record_residuals=False)


def run_method(
    kind: PrecondKind,
    a: SparseCoo,
    b: np.ndarray,
    model: Optional[GnnModel] = None,
    settings: Optional[BenchmarkSettings] = None,
    dropout_eps: Optional[float] = None,
) -> Dict[str, Any]:
    """
    방법 하나의 측정 결과 행

    전처리기 생성 또는 풀이가 실패하면 error 필드에 메시지를 담고 반복 수는 NaN.
    """
    settings = settings or BenchmarkSettings()
    kind = PrecondKind(kind)
    solve_cfg = settings.solve_config()
    row: Dict[str, Any] = {"method": kind.value, "n": a.n_rows, "nnz_a": a.nnz}

    timed = []
    try:
        for run in range(settings.warmup + settings.repeats):
            p = build_preconditioner(kind, a, model)
            if dropout_eps is not None:
                p = fill_in_dropout(p, dropout_eps)
            _, report = pcg(a, b, p, solve_cfg)
            if run >= settings.warmup:
                timed.append((p.nnz, report))
    except FAILURES as e:
        logger.error(f"{kind.value} 실행 실패 (n={a.n_rows}): {e}")
        row.update({key: np.nan for key in ("precond_nnz", "iterations", "p_time", "cg_time", "total_time",
                                            "tri_solve_time_per_iter", "final_rel_residual", "true_rel_residual")})
        row.update({"converged": False, "residual_gap_flag": False, "breakdown": False,
                    "repeats": settings.repeats, "error": str(e)})
        return row

    nnz, last = timed[-1]
    row.update({
        "precond_nnz": nnz,
        "iterations": last.iterations,
        "converged": last.converged,
        "p_time": float(np.mean([r.p_time for _, r in timed])),
        "cg_time": float(np.mean([r.cg_time for _, r in timed])),
        "total_time": float(np.mean([r.total_time for _, r in timed])),
        "tri_solve_time_per_iter": float(np.mean([r.tri_solve_time_per_iter for _, r in timed])),
        "final_rel_residual": last.final_rel_residual,
        "true_rel_residual": last.true_rel_residual,
        "residual_gap_flag": last.residual_gap_flag,
        "breakdown": last.breakdown,
        "repeats": settings.repeats,
        "error": "",
    })
    return row


def evaluate_matrices(
    matrices: Sequence[Tuple[Dict[str, Any], SparseCoo, np.ndarray]],
    methods: Sequence[str],
    models: Dict[str, GnnModel],
    settings: BenchmarkSettings,
    threads: int = 1,
    progress: bool = True,
) -> pd.DataFrame:
    """
    (행렬 정보, 행렬, 우변) 목록 × 방법 목록 평가

    Args:
        matrices: 행렬 정보 사전은 결과 행의 앞쪽 열이 됩니다
        methods: none / jacobi / ic0 / nic / gnnic
        models: 학습 방법 이름 → 모델
        threads: 행렬 단위 병렬 실행 수 (측정 시간은 1일 때만 신뢰 가능)
    """
    if threads > 1:
        logger.warning(f"threads={threads}: 측정 시간은 단일 스레드 실행에서만 비교 가능합니다")

    def evaluate(item) -> List[Dict[str, Any]]:
        info, a, b = item
        return [{**info, **run_method(PrecondKind(m), a, b, models.get(m), settings)} for m in methods]

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(tqdm(pool.map(evaluate, matrices), total=len(matrices),
                               desc="eval", disable=not progress))
    else:
        chunks = [evaluate(item) for item in tqdm(matrices, desc="eval", disable=not progress)]
    return pd.DataFrame([row for chunk in chunks for row in chunk])


def summarize(runs: pd.DataFrame, by: Sequence[str] = ("method",)) -> pd.DataFrame:
    """방법별 평균 (Iters., P time, CG time, Total time)"""
    by = list(by)
    grouped = runs.groupby(by, sort=False)
    summary = grouped.agg(
        iterations=("iterations", "mean"),
        p_time=("p_time", "mean"),
        cg_time=("cg_time", "mean"),
        total_time=("total_time", "mean"),
        tri_solve_time_per_iter=("tri_solve_time_per_iter", "mean"),
        converged=("converged", "mean"),
        matrices=("iterations", "size"),
    ).reset_index()
    if "method" in by:
        order = {m: i for i, m in enumerate(METHOD_ORDER)}
        summary = summary.sort_values(by=[c for c in by if c != "method"] + ["method"],
                                      key=lambda col: col.map(order) if col.name == "method" else col,
                                      kind="stable").reset_index(drop=True)
    return summary

"""
(전처리) 켤레 기울기법 모듈

IC-PCG 알고리즘을 그대로 구현합니다: 반복마다 L y = r, Lᵀ z = y 두 번의 삼각 해법
(Jacobi는 대각 나눗셈). 정지 조건은 ‖r_k‖₂ / ‖b‖₂ <= rel_tol.
"""

import json
import logging
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from src.precond import Preconditioner, identity_preconditioner
from src.sparse import SparseCoo, SparseCsr, SparseFormatError, coo_to_csr, csr_matvec

from .triangular import tri_solve_lower, tri_solve_upper

logger = logging.getLogger(__name__)

RESIDUAL_GAP_FACTOR = 10.0


@dataclass
class SolveConfig:
    """CG / PCG 설정"""

    rel_tol: float = 1e-6
    max_iters: Optional[int] = None
    record_residuals: bool = True
    x0_seed: Optional[int] = None
    check_application: bool = False

    def __post_init__(self):
        if not self.rel_tol > 0:
            raise ValueError(f"rel_tol은 양수여야 합니다: {self.rel_tol}")
        if self.max_iters is not None and self.max_iters < 0:
            raise ValueError(f"max_iters는 0 이상이어야 합니다: {self.max_iters}")

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "SolveConfig":
        config = config or {}
        return cls(**{k: config[k] for k in cls.__dataclass_fields__ if k in config})

    def resolved_max_iters(self, n: int) -> int:
        return self.max_iters if self.max_iters is not None else 10 * n


@dataclass
class SolveReport:
    """
    풀이 결과 보고서

    residual_history는 기록 시 길이 iterations + 1 (초기 잔차 포함).
    """

    method: str
    n: int
    iterations: int
    converged: bool
    final_rel_residual: float
    true_rel_residual: float
    residual_gap_flag: bool
    breakdown: bool
    p_time: float
    cg_time: float
    total_time: float
    tri_solve_time_per_iter: float
    residual_history: Optional[List[float]] = field(default=None, repr=False)

    def to_dict(self, include_history: bool = False) -> Dict[str, Any]:
        data = asdict(self)
        if not include_history:
            data.pop("residual_history")
        return data

    def write_json(self, path: Union[str, Path], extra: Optional[Dict[str, Any]] = None) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = self.to_dict(include_history=True)
        if extra:
            payload.update(extra)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2)
        return path

    def write_residual_csv(self, path: Union[str, Path]) -> Path:
        if self.residual_history is None:
            raise ValueError("잔차 이력이 기록되지 않았습니다 (record_residuals=False)")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        frame = pd.DataFrame({
            "iteration": np.arange(len(self.residual_history)),
            "rel_residual": self.residual_history,
        })
        frame.to_csv(path, index=False)
        return path


def apply_preconditioner(p: Preconditioner, r: np.ndarray) -> np.ndarray:
    """
    z = P⁻¹ r

    Raises:
        TriangularSolveError: 인자 대각 0
    """
    if p.has_factor:
        y = tri_solve_lower(p.lower_csr, r)
        return tri_solve_upper(p.upper_csr, y)
    if p.diagonal is not None:
        return r / p.diagonal
    return r.copy()


def _as_csr(a: Union[SparseCoo, SparseCsr]) -> SparseCsr:
    return coo_to_csr(a) if isinstance(a, SparseCoo) else a


def pcg(
    a: Union[SparseCoo, SparseCsr],
    b: np.ndarray,
    p: Preconditioner,
    cfg: Optional[SolveConfig] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """
    전처리 켤레 기울기법

    Args:
        a: SPD 행렬
        b: 우변 벡터
        p: 전처리기
        cfg: 풀이 설정

    Returns:
        (x, SolveReport). 수렴 실패는 예외가 아니라 converged=False로 보고
    """
    cfg = cfg or SolveConfig()
    a_csr = _as_csr(a)
    n = a_csr.n_rows
    b = np.asarray(b, dtype=np.float64)
    if b.ndim != 1 or b.shape[0] != n or a_csr.n_cols != n:
        raise SparseFormatError(f"차원 불일치: A {a_csr.n_rows}x{a_csr.n_cols}, b {b.shape}")
    if p.n != n:
        raise SparseFormatError(f"전처리기 크기 불일치: {p.n} != {n}")

    max_iters = cfg.resolved_max_iters(n)
    uses_tri_solve = p.has_factor

    start = time.perf_counter()
    if cfg.x0_seed is None:
        x = np.zeros(n)
    else:
        x = np.random.default_rng(cfg.x0_seed).standard_normal(n)

    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        b_norm = 1.0
        x = np.zeros(n)

    r = b - csr_matvec(a_csr, x)
    rel_res = float(np.linalg.norm(r)) / b_norm
    history = [rel_res] if cfg.record_residuals else None

    tri_time = 0.0
    applications = 0
    iterations = 0
    converged = rel_res <= cfg.rel_tol
    breakdown = False

    def precondition(residual: np.ndarray) -> np.ndarray:
        nonlocal tri_time, applications
        t0 = time.perf_counter()
        z_out = apply_preconditioner(p, residual)
        if uses_tri_solve:
            tri_time += time.perf_counter() - t0
            applications += 1
            if cfg.check_application:
                _check_application(p, z_out, residual)
        return z_out

    if not converged and max_iters > 0:
        z = precondition(r)
        direction = z.copy()
        rz = float(r @ z)
        while iterations < max_iters:
            w = csr_matvec(a_csr, direction)
            pw = float(direction @ w)
            if not (pw > 0.0 and np.isfinite(pw)):
                breakdown = True
                logger.warning(f"PCG 붕괴: pᵀAp = {pw:.3g} (반복 {iterations})")
                break
            alpha = rz / pw
            x += alpha * direction
            r -= alpha * w
            iterations += 1

            rel_res = float(np.linalg.norm(r)) / b_norm
            if history is not None:
                history.append(rel_res)
            if rel_res <= cfg.rel_tol:
                converged = True
                break

            z = precondition(r)
            rz_new = float(r @ z)
            beta = rz_new / rz
            direction = z + beta * direction
            rz = rz_new

    cg_time = time.perf_counter() - start

    true_rel = float(np.linalg.norm(b - csr_matvec(a_csr, x))) / b_norm
    gap_flag = abs(true_rel - rel_res) > RESIDUAL_GAP_FACTOR * cfg.rel_tol
    if gap_flag:
        logger.warning(f"재귀 잔차({rel_res:.3e})와 실제 잔차({true_rel:.3e})의 차이가 큽니다")
    if not converged:
        logger.warning(f"{p.kind.value}: {iterations}회 반복 후 미수렴 (상대 잔차 {rel_res:.3e})")

    report = SolveReport(
        method=p.kind.value,
        n=n,
        iterations=iterations,
        converged=converged,
        final_rel_residual=rel_res,
        true_rel_residual=true_rel,
        residual_gap_flag=gap_flag,
        breakdown=breakdown,
        p_time=p.p_time,
        cg_time=cg_time,
        total_time=p.p_time + cg_time,
        tri_solve_time_per_iter=tri_time / applications if applications else 0.0,
        residual_history=history,
    )
    logger.debug(
        f"{p.kind.value}: 반복 {iterations}, 수렴={converged}, P {p.p_time:.4f}s, CG {cg_time:.4f}s"
    )
    return x, report


def cg(
    a: Union[SparseCoo, SparseCsr],
    b: np.ndarray,
    cfg: Optional[SolveConfig] = None,
) -> Tuple[np.ndarray, SolveReport]:
    """전처리 없는 켤레 기울기법 (M = I 인 PCG)"""
    n = a.n_rows
    return pcg(a, b, identity_preconditioner(n), cfg)


def _check_application(p: Preconditioner, z: np.ndarray, r: np.ndarray, tol: float = 1e-12) -> None:
    """‖L Lᵀ z − r‖ / ‖r‖ 점검"""
    t = csr_matvec(p.upper_csr, z)
    back = csr_matvec(p.lower_csr, t)
    r_norm = float(np.linalg.norm(r))
    err = float(np.linalg.norm(back - r)) / r_norm if r_norm > 0 else 0.0
    if err > tol:
        logger.warning(f"{p.kind.value}: 전처리 적용 오차 {err:.3e} > {tol:.0e}")

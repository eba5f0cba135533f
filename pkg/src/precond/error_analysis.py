"""
인자 오차 분석 모듈

예측 인자와 IC(0) 인자의 원소별 상대 오차 |L_pred − L_IC| / |L_IC| 를
대각 / 비대각으로 나누어 요약합니다.
"""

import logging
from typing import Any, Dict, Tuple

import numpy as np

from src.sparse import FactorError, LowerFactor

logger = logging.getLogger(__name__)


def _summary(errors: np.ndarray) -> Dict[str, Any]:
    if errors.size == 0:
        return {"count": 0, "mean": 0.0, "max": 0.0, "median": 0.0, "values": errors}
    finite = errors[np.isfinite(errors)]
    return {
        "count": int(errors.size),
        "mean": float(finite.mean()) if finite.size else float("inf"),
        "max": float(errors.max()),
        "median": float(np.median(errors)),
        "values": errors,
    }


def relative_errors(l_pred: LowerFactor, l_ic: LowerFactor) -> np.ndarray:
    """
    원소별 상대 오차 (저장 순서)

    IC 값이 0인 원소는 예측도 0이면 0, 아니면 inf.

    Raises:
        FactorError: 패턴 불일치
    """
    if not (np.array_equal(l_pred.matrix.rows, l_ic.matrix.rows)
            and np.array_equal(l_pred.matrix.cols, l_ic.matrix.cols)):
        raise FactorError("상대 오차 계산: 두 인자의 패턴이 다릅니다")
    diff = np.abs(l_pred.values - l_ic.values)
    ref = np.abs(l_ic.values)
    out = np.where(diff == 0.0, 0.0, np.inf)
    np.divide(diff, ref, out=out, where=ref > 0)
    return out


def factor_relative_error(
    l_pred: LowerFactor,
    l_ic: LowerFactor,
) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """
    대각 / 비대각 상대 오차 통계

    Returns:
        (diag_stats, offdiag_stats) - 각각 count, mean, max, median, values(전체 분포)
    """
    errors = relative_errors(l_pred, l_ic)
    diag_mask = l_ic.diag_mask
    diag_stats = _summary(errors[diag_mask])
    offdiag_stats = _summary(errors[~diag_mask])
    logger.debug(
        f"상대 오차: 대각 평균 {diag_stats['mean']:.3%}, 비대각 평균 {offdiag_stats['mean']:.3%}"
    )
    return diag_stats, offdiag_stats

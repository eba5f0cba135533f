"""
모델 체크포인트 모듈

JSON 텍스트 형식: 아키텍처 설정 + 평탄화된 파라미터 목록 (+ 선택적 학습 상태).
float는 repr로 기록되므로 쓰기/읽기 왕복이 무손실입니다.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np

from .model import GnnConfig, GnnModel

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "gnn-ic-checkpoint"
CHECKPOINT_VERSION = 2


class CheckpointError(ValueError):
    """체크포인트 형식 / 버전 / 아키텍처 불일치"""
    pass


def save_checkpoint(
    model: GnnModel,
    path: Union[str, Path],
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    체크포인트 저장

    Args:
        model: 저장할 모델
        path: 출력 경로 (.json)
        extra: 함께 저장할 부가 정보 (학습 상태, 설정 등, JSON 직렬화 가능해야 함)

    Returns:
        저장된 경로
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "architecture": model.config.to_dict(),
        "param_count": model.param_count,
        "param_names": model.param_names,
        "params": model.to_vector().tolist(),
        "extra": extra or {},
    }
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", encoding="utf-8") as f:
        json.dump(payload, f)
    tmp.replace(path)
    logger.debug(f"체크포인트 저장: {path}")
    return path


def load_checkpoint(path: Union[str, Path]) -> Tuple[GnnModel, Dict[str, Any]]:
    """
    체크포인트 읽기

    Returns:
        (모델, extra 사전)

    Raises:
        FileNotFoundError: 파일 없음
        CheckpointError: 형식 / 버전 / 파라미터 수 불일치
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"체크포인트를 찾을 수 없습니다: {path}")

    try:
        with open(path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise CheckpointError(f"체크포인트 JSON 파싱 실패: {path}") from e

    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"체크포인트 형식이 아닙니다: {path}")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"지원하지 않는 체크포인트 버전: {payload.get('version')}")

    config = GnnConfig.from_dict(payload.get("architecture", {}))
    vector = np.asarray(payload.get("params", []), dtype=np.float64)
    model_shell = GnnModel(config)
    if vector.shape[0] != model_shell.param_count or payload.get("param_count") != model_shell.param_count:
        raise CheckpointError(
            f"파라미터 수 불일치: 파일 {vector.shape[0]}, 아키텍처 {model_shell.param_count}"
        )
    model = GnnModel.from_vector(config, vector)
    logger.debug(f"체크포인트 로드: {path} ({model})")
    return model, payload.get("extra", {})

"""
Adam 옵티마이저와 학습률 스케줄
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List

import numpy as np

logger = logging.getLogger(__name__)


class NonFiniteGradientError(ArithmeticError):
    """NaN/Inf 기울기로 Adam 스텝 중단"""

    def __init__(self, names: List[str]):
        self.names = names
        super().__init__(f"유한하지 않은 기울기: {', '.join(names)}")


@dataclass
class AdamState:
    """1차 / 2차 모멘트 누적값과 스텝 카운터"""

    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_params(cls, params: Dict[str, np.ndarray], **kwargs) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
            **kwargs,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "step": self.step,
            "m": {k: v.reshape(-1).tolist() for k, v in self.m.items()},
            "v": {k: v.reshape(-1).tolist() for k, v in self.v.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], params: Dict[str, np.ndarray]) -> "AdamState":
        """체크포인트에서 복원 (형상은 params를 따름)"""
        def restore(moments: Dict[str, List[float]]) -> Dict[str, np.ndarray]:
            return {k: np.asarray(moments[k], dtype=np.float64).reshape(p.shape) for k, p in params.items()}

        return cls(
            beta1=data.get("beta1", 0.9),
            beta2=data.get("beta2", 0.999),
            eps=data.get("eps", 1e-8),
            step=int(data.get("step", 0)),
            m=restore(data["m"]),
            v=restore(data["v"]),
        )


def adam_step(
    state: AdamState,
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    lr_t: float,
) -> Dict[str, np.ndarray]:
    """
    편향 보정 Adam 갱신

    Args:
        state: 옵티마이저 상태 (제자리 갱신)
        params: 현재 파라미터
        grads: 같은 키의 기울기
        lr_t: 이번 스텝 학습률

    Returns:
        갱신된 파라미터 (새 배열)

    Raises:
        NonFiniteGradientError: NaN/Inf 기울기 (상태와 파라미터는 변경되지 않음)
        ValueError: 형상 불일치
    """
    bad = [k for k, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        raise NonFiniteGradientError(bad)
    for k, p in params.items():
        if grads[k].shape != p.shape:
            raise ValueError(f"기울기 형상 불일치 {k}: {grads[k].shape} != {p.shape}")
    if not state.m:
        state.m = {k: np.zeros_like(p) for k, p in params.items()}
        state.v = {k: np.zeros_like(p) for k, p in params.items()}

    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1 ** t
    correction2 = 1.0 - state.beta2 ** t

    updated = {}
    for k, p in params.items():
        g = grads[k]
        state.m[k] = state.beta1 * state.m[k] + (1.0 - state.beta1) * g
        state.v[k] = state.beta2 * state.v[k] + (1.0 - state.beta2) * g * g
        m_hat = state.m[k] / correction1
        v_hat = state.v[k] / correction2
        updated[k] = p - lr_t * m_hat / (np.sqrt(v_hat) + state.eps)
    return updated


def lr_schedule(step: int, cfg) -> float:
    """
    선형 워밍업 후 상수 학습률

    step <= warmup_steps 에서 lr·step/warmup_steps, 이후 lr.
    """
    if step < 1:
        raise ValueError(f"step은 1부터 시작합니다: {step}")
    warmup = cfg.warmup_steps or 0
    if warmup <= 0 or step >= warmup:
        return float(cfg.lr)
    return float(cfg.lr) * step / warmup

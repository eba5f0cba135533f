"""
실험 설정 모듈

YAML 설정 파일 + CLI 플래그 재정의를 하나의 ExperimentConfig로 해석합니다.
해석된 설정은 모든 출력 산출물에 그대로 기록됩니다.
"""

import copy
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import yaml
from dotenv import load_dotenv

logger = logging.getLogger(__name__)

CONFIG_ENV = "PRECOND_LAB_CONFIG"
DEFAULT_CONFIG_PATH = Path("config") / "config.yaml"


@dataclass
class ExperimentConfig:
    """명령 하나의 해석된 설정"""

    command: str
    seed: int = 0
    out_dir: str = "output"
    threads: int = 1
    mode: Optional[str] = None
    settings: Dict[str, Any] = field(default_factory=dict)
    source: Optional[str] = None

    def section(self, name: Optional[str] = None) -> Dict[str, Any]:
        """명령별 설정 섹션 (없으면 빈 사전)"""
        return dict(self.settings.get(name or self.command) or {})

    @property
    def progress(self) -> bool:
        return bool(self.settings.get("progress", True))

    @property
    def out_path(self) -> Path:
        return Path(self.out_dir)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "command": self.command,
            "seed": self.seed,
            "out_dir": self.out_dir,
            "threads": self.threads,
            "mode": self.mode,
            "source": self.source,
            "settings": copy.deepcopy(self.settings),
        }


def load_config(path: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """
    설정 파일 로드

    경로 우선순위: 인자 → 환경변수 PRECOND_LAB_CONFIG (.env 포함) → config/config.yaml.
    기본 경로에 파일이 없으면 빈 설정을 반환합니다.

    Raises:
        FileNotFoundError: 명시한 경로가 없는 경우
        ValueError: YAML 최상위가 사전이 아닌 경우
    """
    load_dotenv()
    explicit = path or os.environ.get(CONFIG_ENV)
    config_path = Path(explicit) if explicit else DEFAULT_CONFIG_PATH
    if not config_path.exists():
        if explicit:
            raise FileNotFoundError(f"설정 파일을 찾을 수 없습니다: {config_path}")
        logger.debug("설정 파일 없음, 기본값 사용")
        return {}

    with open(config_path, "r", encoding="utf-8") as f:
        data = yaml.safe_load(f) or {}
    if not isinstance(data, dict):
        raise ValueError(f"설정 파일 최상위는 사전이어야 합니다: {config_path}")
    logger.debug(f"설정 파일 로드: {config_path}")
    data["_path"] = str(config_path)
    return data


def resolve_config(
    command: str,
    path: Optional[Union[str, Path]] = None,
    seed: Optional[int] = None,
    out_dir: Optional[str] = None,
    mode: Optional[str] = None,
    threads: Optional[int] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    파일 설정에 플래그를 덮어써 ExperimentConfig 생성

    Args:
        command: gen / train / eval / crossscale / dropout / analyze
        overrides: 명령 섹션에 병합할 추가 값
    """
    settings = load_config(path)
    source = settings.pop("_path", None)
    if overrides:
        section = dict(settings.get(command) or {})
        section.update(overrides)
        settings[command] = section

    resolved = ExperimentConfig(
        command=command,
        seed=int(seed if seed is not None else settings.get("seed", 0)),
        out_dir=str(out_dir or settings.get("out_dir", "output")),
        threads=int(threads if threads is not None else settings.get("threads", 1)),
        mode=mode or (settings.get(command) or {}).get("mode"),
        settings=settings,
        source=source,
    )
    if resolved.threads < 1:
        raise ValueError(f"threads는 1 이상이어야 합니다: {resolved.threads}")
    return resolved

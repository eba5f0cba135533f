"""
결과 표 출력 모듈

같은 DataFrame에서 CSV와 JSON을 함께 씁니다. CSV 첫 줄은 `# provenance: {...}` 주석,
JSON은 {"provenance": ..., "records": [...]} 형식입니다.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional, Tuple, Union

import numpy as np
import pandas as pd

from .config import ExperimentConfig

logger = logging.getLogger(__name__)

PROVENANCE_PREFIX = "# provenance: "


def _json_default(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"JSON 직렬화 불가: {type(value).__name__}")


def provenance(config: ExperimentConfig, extra: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    data = config.to_dict()
    if extra:
        data.update(extra)
    return data


def write_table(
    frame: pd.DataFrame,
    out_dir: Union[str, Path],
    name: str,
    config: ExperimentConfig,
    extra: Optional[Dict[str, Any]] = None,
    write_json: bool = True,
) -> Tuple[Path, Optional[Path]]:
    """
    표를 <name>.csv / <name>.json 으로 저장

    Returns:
        (CSV 경로, JSON 경로 또는 None)
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    meta = provenance(config, extra)

    csv_path = out_dir / f"{name}.csv"
    with open(csv_path, "w", encoding="utf-8", newline="") as f:
        f.write(PROVENANCE_PREFIX + json.dumps(meta, ensure_ascii=False, default=_json_default) + "\n")
        frame.to_csv(f, index=False)

    json_path = None
    if write_json:
        json_path = out_dir / f"{name}.json"
        payload = {"provenance": meta, "records": frame.to_dict(orient="records")}
        with open(json_path, "w", encoding="utf-8") as f:
            json.dump(payload, f, ensure_ascii=False, indent=2, default=_json_default)

    logger.info(f"결과 저장: {csv_path}" + (f", {json_path}" if json_path else ""))
    return csv_path, json_path


def read_table(csv_path: Union[str, Path]) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """write_table로 쓴 CSV 읽기 → (DataFrame, provenance)"""
    with open(csv_path, "r", encoding="utf-8") as f:
        first = f.readline()
    meta = json.loads(first[len(PROVENANCE_PREFIX):]) if first.startswith(PROVENANCE_PREFIX) else {}
    frame = pd.read_csv(csv_path, skiprows=1 if meta else 0)
    return frame, meta


def write_json(
    payload: Dict[str, Any],
    path: Union[str, Path],
    config: ExperimentConfig,
) -> Path:
    """provenance를 포함한 JSON 문서 저장"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    document = {"provenance": provenance(config), **payload}
    with open(path, "w", encoding="utf-8") as f:
        json.dump(document, f, ensure_ascii=False, indent=2, default=_json_default)
    return path

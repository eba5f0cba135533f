"""
학습 데이터셋 모듈

생성기 명세(패밀리 + 크기 + 샘플 수) 또는 매니페스트 디렉터리로부터
train / validation / test 행렬을 만들고, 학습용 샘플(그래프, IC(0) 인자, 우변)을 준비합니다.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.features import GraphSample, build_graph
from src.precond import IcBreakdownError, ic0_factor
from src.sparse import (
    FAMILIES,
    LowerFactor,
    SparseCoo,
    derive_seed,
    gen_family,
    read_matrix_market,
    write_matrix_market,
)

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
SPLITS = ("train", "validation", "test")
RHS_STREAM = 99


@dataclass
class DatasetSpec:
    """생성기 명세"""

    family: str = "poisson2d"
    sizes: List[int] = field(default_factory=lambda: [32])
    train: int = 100
    validation: int = 30
    test: int = 30
    seed: int = 0
    random_coefficients: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"알 수 없는 행렬 패밀리: {self.family}")
        if not self.sizes or any(m < 1 for m in self.sizes):
            raise ValueError(f"격자 크기는 1 이상이어야 합니다: {self.sizes}")
        if min(self.train, self.validation, self.test) < 0:
            raise ValueError("샘플 수는 음수일 수 없습니다")

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "DatasetSpec":
        config = dict(config or {})
        if "sizes" in config:
            config["sizes"] = [int(m) for m in config["sizes"]]
        return cls(**{k: config[k] for k in cls.__dataclass_fields__ if k in config})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def count(self, split: str) -> int:
        return getattr(self, split)


@dataclass(frozen=True)
class MatrixEntry:
    """매니페스트 한 줄"""

    sample_id: str
    split: str
    family: str
    m: int
    n: int
    coeff_seed: Optional[int] = None
    nnz: Optional[int] = None
    nnz_lower: Optional[int] = None
    path: Optional[str] = None

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


@dataclass(eq=False)
class TrainingSample:
    """학습 / 검증 샘플"""

    sample_id: str
    a: SparseCoo
    graph: GraphSample
    b: np.ndarray
    l_ic: Optional[LowerFactor] = None

    @property
    def n(self) -> int:
        return self.a.n_rows


@dataclass
class Dataset:
    """train / validation 샘플과 건너뛴 샘플 기록"""

    train: List[TrainingSample]
    validation: List[TrainingSample]
    skipped: List[Dict[str, Any]] = field(default_factory=list)
    source: str = ""

    @property
    def train_ids(self) -> List[str]:
        return [s.sample_id for s in self.train]

    @property
    def validation_ids(self) -> List[str]:
        return [s.sample_id for s in self.validation]


def rhs_vector(n: int, seed: int, index: int) -> np.ndarray:
    """표준정규 우변 b (실행 시드와 행렬 인덱스로 결정)"""
    return np.random.default_rng(derive_seed(seed, RHS_STREAM, index)).standard_normal(n)


def plan_entries(spec: DatasetSpec) -> List[MatrixEntry]:
    """명세로부터 생성할 행렬 목록 (아직 행렬은 만들지 않음)"""
    dim = FAMILIES[spec.family]
    entries = []
    for split_index, split in enumerate(SPLITS):
        for size_index, m in enumerate(spec.sizes):
            for i in range(spec.count(split)):
                coeff_seed = derive_seed(spec.seed, split_index, size_index, i) if spec.random_coefficients else None
                entries.append(MatrixEntry(
                    sample_id=f"{split}-m{m}-{i:04d}",
                    split=split,
                    family=spec.family,
                    m=m,
                    n=m ** dim,
                    coeff_seed=coeff_seed,
                ))
    return entries


def generate_matrix(entry: MatrixEntry) -> SparseCoo:
    return gen_family(entry.family, entry.m, entry.coeff_seed)


def write_dataset(
    spec: DatasetSpec,
    out_dir: Union[str, Path],
    provenance: Optional[Dict[str, Any]] = None,
) -> Tuple[Path, List[MatrixEntry]]:
    """
    행렬을 Matrix Market 파일로 쓰고 매니페스트 생성

    Returns:
        (매니페스트 경로, 기록된 항목 목록)

    Raises:
        OSError: 디렉터리에 쓸 수 없는 경우
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for entry in plan_entries(spec):
        a = generate_matrix(entry)
        rel_path = Path(entry.split) / f"{entry.sample_id}.mtx"
        write_matrix_market(a, out_dir / rel_path, symmetric=True,
                            comment=f"{entry.family} m={entry.m} coeff_seed={entry.coeff_seed}")
        written.append(MatrixEntry(
            **{**entry.to_dict(), "nnz": a.nnz, "nnz_lower": (a.nnz + a.n_rows) // 2, "path": rel_path.as_posix()}
        ))

    manifest = {
        "provenance": provenance or {},
        "spec": spec.to_dict(),
        "matrices": [e.to_dict() for e in written],
    }
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, ensure_ascii=False, indent=2)
    logger.info(f"데이터셋 생성 완료: {len(written)}개 행렬 → {out_dir}")
    return manifest_path, written


def read_manifest(dataset_dir: Union[str, Path]) -> List[MatrixEntry]:
    """
    매니페스트 읽기

    Raises:
        FileNotFoundError: 매니페스트 없음
    """
    manifest_path = Path(dataset_dir) / MANIFEST_NAME
    if not manifest_path.exists():
        raise FileNotFoundError(f"매니페스트를 찾을 수 없습니다: {manifest_path}")
    with open(manifest_path, "r", encoding="utf-8") as f:
        manifest = json.load(f)
    fields = MatrixEntry.__dataclass_fields__
    return [MatrixEntry(**{k: v for k, v in item.items() if k in fields}) for item in manifest.get("matrices", [])]


def load_split(source: Union[str, Path, Dict[str, Any]], split: str) -> List[Tuple[MatrixEntry, SparseCoo]]:
    """
    분할 하나의 (항목, 행렬) 목록

    Args:
        source: 매니페스트 디렉터리 경로 또는 생성기 명세 사전
        split: train / validation / test
    """
    if split not in SPLITS:
        raise ValueError(f"알 수 없는 분할: {split}")
    if isinstance(source, dict):
        spec = DatasetSpec.from_dict(source)
        return [(e, generate_matrix(e)) for e in plan_entries(spec) if e.split == split]

    dataset_dir = Path(source)
    return [
        (e, read_matrix_market(dataset_dir / e.path))
        for e in read_manifest(dataset_dir)
        if e.split == split
    ]


def _prepare(
    pairs: List[Tuple[MatrixEntry, SparseCoo]],
    mode: str,
    seed: int,
    offset: int,
    skipped: List[Dict[str, Any]],
) -> List[TrainingSample]:
    samples = []
    for i, (entry, a) in enumerate(pairs):
        l_ic = None
        if mode == "gnnic":
            try:
                l_ic, _ = ic0_factor(a)
            except IcBreakdownError as e:
                logger.warning(f"샘플 {entry.sample_id} 건너뜀: {e}")
                skipped.append({"sample_id": entry.sample_id, "reason": "ic_breakdown", "row": e.row})
                continue
        samples.append(TrainingSample(
            sample_id=entry.sample_id,
            a=a,
            graph=build_graph(a),
            b=rhs_vector(a.n_rows, seed, offset + i),
            l_ic=l_ic,
        ))
    return samples


def load_dataset(
    source: Union[str, Path, Dict[str, Any]],
    mode: str = "gnnic",
    seed: int = 0,
    max_validation: Optional[int] = None,
) -> Dataset:
    """
    학습 / 검증 데이터셋 구성

    Args:
        source: 매니페스트 디렉터리 또는 생성기 명세
        mode: nic 또는 gnnic (gnnic이면 IC(0) 인자를 미리 계산)
        seed: 검증 우변 시드
        max_validation: 검증 샘플 수 상한

    Raises:
        ValueError: 학습 샘플 없음 또는 train / validation ID 중복
    """
    if mode not in ("nic", "gnnic"):
        raise ValueError(f"알 수 없는 학습 방식: {mode}")
    train_pairs = load_split(source, "train")
    val_pairs = load_split(source, "validation")
    if max_validation is not None:
        val_pairs = val_pairs[:max_validation]

    overlap = {e.sample_id for e, _ in train_pairs} & {e.sample_id for e, _ in val_pairs}
    if overlap:
        raise ValueError(f"학습과 검증 샘플 ID가 겹칩니다: {sorted(overlap)[:5]}")

    skipped: List[Dict[str, Any]] = []
    train = _prepare(train_pairs, mode, seed, 0, skipped)
    validation = _prepare(val_pairs, mode, seed, len(train_pairs), skipped)
    if not train:
        raise ValueError("학습 샘플이 없습니다")

    logger.info(f"데이터셋: 학습 {len(train)}개, 검증 {len(validation)}개, 건너뜀 {len(skipped)}개")
    return Dataset(train=train, validation=validation, skipped=skipped,
                   source=str(source) if not isinstance(source, dict) else "generator")

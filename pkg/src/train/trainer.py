"""
학습 루프 모듈

스텝마다 샘플별 Rademacher 벡터로 Hutchinson 손실과 기울기를 계산해 배치 합산 후 Adam으로 갱신하고,
에폭마다 검증 샘플에 PCG를 돌려 평균 반복 수가 가장 적은 에폭의 파라미터를 선택합니다.
"""

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from tqdm import tqdm

from src.gnn import (
    GnnModel,
    GnnNumericError,
    assemble_factor,
    gnn_backward,
    gnn_forward,
    gnn_forward_traced,
    load_checkpoint,
    save_checkpoint,
)
from src.krylov import SolveConfig, pcg
from src.loss import draw_rademacher, hutchinson_loss_and_grad
from src.precond import Preconditioner, PrecondKind, gnn_ic_factor
from src.sparse import FactorError, LowerFactor, derive_seed

from .dataset import Dataset, TrainingSample, load_dataset
from .optimizer import AdamState, NonFiniteGradientError, adam_step, lr_schedule

logger = logging.getLogger(__name__)

MODES = {"nic": PrecondKind.NIC, "gnnic": PrecondKind.GNNIC}
WARMUP_FRACTION = 0.05
BATCH_ORDER_STREAM = 7


@dataclass
class TrainConfig:
    """학습 설정"""

    epochs: int = 50
    lr: float = 0.005
    warmup_steps: Optional[int] = None
    batch_size: int = 8
    seed: int = 0
    init_seed: Optional[int] = None
    correction_init: float = 1e-4
    mode: str = "gnnic"
    validation_samples: Optional[int] = None
    validation_rel_tol: float = 1e-6
    validation_max_iters: int = 2000
    threads: int = 1
    progress: bool = True
    dataset: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.threads < 1:
            raise ValueError("epochs, batch_size, threads는 1 이상이어야 합니다")
        if not self.lr > 0:
            raise ValueError(f"lr은 양수여야 합니다: {self.lr}")
        if self.mode not in MODES:
            raise ValueError(f"알 수 없는 학습 방식: {self.mode} (nic 또는 gnnic)")
        if self.warmup_steps is not None and self.warmup_steps < 0:
            raise ValueError(f"warmup_steps는 0 이상이어야 합니다: {self.warmup_steps}")
        if not self.correction_init > 0:
            raise ValueError(f"correction_init은 양수여야 합니다: {self.correction_init}")

    @classmethod
    def from_dict(cls, config: Optional[Dict[str, Any]] = None) -> "TrainConfig":
        config = config or {}
        return cls(**{k: config[k] for k in cls.__dataclass_fields__ if k in config})

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def resolve_warmup(self, steps_per_epoch: int) -> "TrainConfig":
        """warmup_steps 미지정 시 전체 스텝의 5%"""
        if self.warmup_steps is not None:
            return self
        total = self.epochs * steps_per_epoch
        return replace(self, warmup_steps=max(1, int(round(WARMUP_FRACTION * total))))


@dataclass
class TrainingLog:
    """학습 기록 (JSON lines로 저장되는 레코드 목록)"""

    records: List[Dict[str, Any]] = field(default_factory=list)
    best_epoch: Optional[int] = None

    @property
    def step_records(self) -> List[Dict[str, Any]]:
        return [r for r in self.records if r["type"] == "step"]

    @property
    def validation_records(self) -> List[Dict[str, Any]]:
        return [r for r in self.records if r["type"] == "validation"]

    def write_jsonl(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            for record in self.records:
                f.write(json.dumps(record, ensure_ascii=False) + "\n")
        return path


def select_best_epoch(validation_records: Sequence[Dict[str, Any]]) -> Optional[int]:
    """
    평균 검증 반복 수가 가장 적은 에폭 (동률이면 가장 이른 에폭, 에폭 0은 초기 모델)

    mean_iterations가 None인 레코드(검증 샘플 없음)는 무시하며,
    모두 None이면 마지막 에폭을 반환합니다.
    """
    best_epoch, best_value = None, math.inf
    for record in validation_records:
        value = record.get("mean_iterations")
        if value is not None and value < best_value:
            best_epoch, best_value = record["epoch"], value
    if best_epoch is None and validation_records:
        best_epoch = validation_records[-1]["epoch"]
    return best_epoch


def build_factor(mode: str, sample: TrainingSample, edge_values: np.ndarray) -> LowerFactor:
    """학습 방식에 따른 인자: NIC는 σ·출력, GnnIC는 L_IC + 출력"""
    if mode == "gnnic":
        return gnn_ic_factor(sample.l_ic, sample.graph, edge_values)
    return assemble_factor(sample.graph, edge_values)


def sample_loss_and_grad(
    model: GnnModel,
    sample: TrainingSample,
    mode: str,
    z: np.ndarray,
) -> Tuple[float, Dict[str, np.ndarray]]:
    """
    샘플 하나의 n으로 나눈 손실과 파라미터 기울기

    NIC의 L 값은 σ·출력이므로 상류 기울기는 σ·∂loss/∂L, GnnIC는 ∂loss/∂L 입니다.
    """
    g = sample.graph
    output, trace = gnn_forward_traced(model, g)
    factor = build_factor(mode, sample, output)
    loss, grad_l = hutchinson_loss_and_grad(factor, sample.a, z)
    scale = g.scale if mode == "nic" else 1.0
    upstream = grad_l * (scale / sample.n)
    return loss / sample.n, gnn_backward(model, g, upstream, trace)


class Trainer:
    """GNN 전처리기 학습기"""

    def __init__(
        self,
        cfg: TrainConfig,
        dataset: Dataset,
        out_dir: Optional[Union[str, Path]] = None,
        provenance: Optional[Dict[str, Any]] = None,
    ):
        """
        Args:
            cfg: 학습 설정
            dataset: 학습 / 검증 샘플
            out_dir: 로그와 체크포인트 디렉터리 (None이면 기록하지 않음)
            provenance: 로그와 체크포인트에 함께 기록할 실행 설정
        """
        self.provenance = provenance or {}
        self.dataset = dataset
        self.steps_per_epoch = math.ceil(len(dataset.train) / cfg.batch_size)
        self.cfg = cfg.resolve_warmup(self.steps_per_epoch)
        self.kind = MODES[self.cfg.mode]
        self.out_dir = Path(out_dir) if out_dir is not None else None
        self.solve_cfg = SolveConfig(
            rel_tol=self.cfg.validation_rel_tol,
            max_iters=self.cfg.validation_max_iters,
            record_residuals=False,
        )

    @property
    def log_path(self) -> Optional[Path]:
        return self.out_dir / "train_log.jsonl" if self.out_dir else None

    @property
    def last_checkpoint_path(self) -> Optional[Path]:
        return self.out_dir / "checkpoint_last.json" if self.out_dir else None

    @property
    def best_checkpoint_path(self) -> Optional[Path]:
        return self.out_dir / "checkpoint_best.json" if self.out_dir else None

    def batch_order(self, epoch: int) -> np.ndarray:
        """에폭별 학습 샘플 순서 ((seed, epoch)에서 결정되므로 재개해도 동일)"""
        rng = np.random.default_rng(derive_seed(self.cfg.seed, BATCH_ORDER_STREAM, epoch))
        return rng.permutation(len(self.dataset.train))

    def _sample_job(self, model: GnnModel, index: int, step: int):
        sample = self.dataset.train[index]
        z = draw_rademacher(sample.n, self.cfg.seed, step=step, sample=index).values
        try:
            loss, grads = sample_loss_and_grad(model, sample, self.cfg.mode, z)
        except (GnnNumericError, FactorError) as e:
            return index, None, None, str(e)
        return index, loss, grads, None

    def batch_gradient(
        self,
        model: GnnModel,
        indices: Sequence[int],
        step: int,
    ) -> Tuple[List[float], Dict[str, np.ndarray], List[Dict[str, Any]]]:
        """
        배치 기울기 = 샘플별 기울기의 합 (샘플 순서대로 합산)

        Returns:
            (샘플별 손실, 합산 기울기, 건너뛴 샘플 레코드)
        """
        if self.cfg.threads > 1 and len(indices) > 1:
            with ThreadPoolExecutor(max_workers=self.cfg.threads) as pool:
                results = list(pool.map(lambda i: self._sample_job(model, i, step), indices))
        else:
            results = [self._sample_job(model, i, step) for i in indices]

        total = {name: np.zeros(shape) for name, shape in model.shapes}
        losses, skipped = [], []
        for index, loss, grads, error in results:
            if error is not None:
                sample_id = self.dataset.train[index].sample_id
                logger.warning(f"스텝 {step}: 샘플 {sample_id} 건너뜀 ({error})")
                skipped.append({"type": "skipped", "step": step, "sample_id": sample_id, "reason": error})
                continue
            losses.append(loss)
            for name in total:
                total[name] += grads[name]
        return losses, total, skipped

    def validation_preconditioner(self, model: GnnModel, sample: TrainingSample) -> Preconditioner:
        factor = build_factor(self.cfg.mode, sample, gnn_forward(model, sample.graph))
        return Preconditioner.from_factor(self.kind, factor)

    def validate(self, model: GnnModel, epoch: int) -> Dict[str, Any]:
        """검증 샘플 PCG 반복 수 (구성 실패 또는 미수렴은 상한 반복 수로 집계)"""
        iterations, converged = [], []
        for sample in self.dataset.validation:
            try:
                p = self.validation_preconditioner(model, sample)
                _, report = pcg(sample.a, sample.b, p, self.solve_cfg)
                iterations.append(report.iterations)
                converged.append(report.converged)
            except (GnnNumericError, FactorError, ZeroDivisionError) as e:
                logger.warning(f"에폭 {epoch}: 검증 샘플 {sample.sample_id} 전처리 실패 ({e})")
                iterations.append(self.cfg.validation_max_iters)
                converged.append(False)
        mean_iterations = float(np.mean(iterations)) if iterations else None
        return {
            "type": "validation",
            "epoch": epoch,
            "mean_iterations": mean_iterations,
            "iterations": iterations,
            "converged": int(sum(converged)),
            "samples": len(iterations),
        }

    def _save_state(
        self,
        model: GnnModel,
        state: AdamState,
        epoch: int,
        step: int,
        log: TrainingLog,
        snapshots: Dict[int, List[float]],
    ) -> None:
        if self.out_dir is None:
            return
        training_state = {
            "epoch": epoch,
            "step": step,
            "adam": state.to_dict(),
            "records": log.records,
            "snapshots": {str(k): v for k, v in snapshots.items()},
        }
        save_checkpoint(model, self.last_checkpoint_path,
                        extra={"train_config": self.cfg.to_dict(), "provenance": self.provenance,
                               "training_state": training_state})
        log.write_jsonl(self.log_path)

    def fit(
        self,
        model: GnnModel,
        resume_from: Optional[Union[str, Path]] = None,
    ) -> Tuple[GnnModel, TrainingLog]:
        """
        학습 실행

        Args:
            model: 초기 모델 (resume_from이 있으면 체크포인트 값으로 대체)
            resume_from: checkpoint_last.json 경로

        Returns:
            (최적 에폭 모델, 학습 로그)
        """
        model = model.copy()
        state = AdamState.for_params(model.params)
        log = TrainingLog(records=[{"type": "config", "config": self.cfg.to_dict(),
                                    "param_count": model.param_count,
                                    "train_ids": self.dataset.train_ids,
                                    "validation_ids": self.dataset.validation_ids,
                                    **({"provenance": self.provenance} if self.provenance else {})}])
        log.records.extend({"type": "skipped", "step": 0, **s} for s in self.dataset.skipped)
        snapshots: Dict[int, List[float]] = {}
        start_epoch, step = 1, 0

        if resume_from is not None:
            model, extra = load_checkpoint(resume_from)
            saved = extra.get("training_state")
            if not saved:
                raise ValueError(f"재개할 학습 상태가 없는 체크포인트입니다: {resume_from}")
            state = AdamState.from_dict(saved["adam"], model.params)
            log = TrainingLog(records=list(saved["records"]))
            snapshots = {int(k): v for k, v in saved["snapshots"].items()}
            start_epoch, step = int(saved["epoch"]) + 1, int(saved["step"])
            logger.info(f"학습 재개: 에폭 {start_epoch}부터 (스텝 {step})")
        else:
            # 초기 모델도 최적 에폭 후보
            initial = self.validate(model, 0)
            log.records.append(initial)
            snapshots[0] = model.to_vector().tolist()
            if initial["mean_iterations"] is not None:
                logger.info(f"초기 모델: 평균 검증 반복 {initial['mean_iterations']:.2f}")

        logger.info(
            f"학습 시작: 방식={self.cfg.mode}, 샘플 {len(self.dataset.train)}개, "
            f"에폭 {self.cfg.epochs}, 배치 {self.cfg.batch_size}, 워밍업 {self.cfg.warmup_steps} 스텝"
        )
        epochs = tqdm(range(start_epoch, self.cfg.epochs + 1), desc="epoch",
                      disable=not self.cfg.progress, initial=start_epoch - 1, total=self.cfg.epochs)
        for epoch in epochs:
            order = self.batch_order(epoch)
            for start in range(0, len(order), self.cfg.batch_size):
                step += 1
                indices = [int(i) for i in order[start:start + self.cfg.batch_size]]
                losses, grads, skipped = self.batch_gradient(model, indices, step)
                log.records.extend(skipped)
                if not losses:
                    continue

                lr_t = lr_schedule(step, self.cfg)
                try:
                    model.params = adam_step(state, model.params, grads, lr_t)
                except NonFiniteGradientError as e:
                    logger.warning(f"스텝 {step}: Adam 스텝 중단 ({e})")
                    log.records.append({"type": "skipped", "step": step, "reason": str(e)})
                    continue
                grad_norm = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
                log.records.append({
                    "type": "step",
                    "epoch": epoch,
                    "step": step,
                    "loss": float(np.mean(losses)),
                    "lr": lr_t,
                    "grad_norm": grad_norm,
                    "samples": len(losses),
                })
                logger.debug(f"스텝 {step}: loss={np.mean(losses):.6g}, lr={lr_t:.3g}")

            validation = self.validate(model, epoch)
            log.records.append(validation)
            snapshots[epoch] = model.to_vector().tolist()
            if validation["mean_iterations"] is not None:
                logger.info(f"에폭 {epoch}: 평균 검증 반복 {validation['mean_iterations']:.2f}")
            self._save_state(model, state, epoch, step, log, snapshots)

        log.best_epoch = select_best_epoch(log.validation_records)
        best = GnnModel.from_vector(model.config, np.asarray(snapshots[log.best_epoch]))
        logger.info(f"최적 에폭: {log.best_epoch}")
        if self.out_dir is not None:
            save_checkpoint(best, self.best_checkpoint_path, extra={
                "train_config": self.cfg.to_dict(),
                "provenance": self.provenance,
                "best_epoch": log.best_epoch,
                "mode": self.cfg.mode,
            })
            log.write_jsonl(self.log_path)
        return best, log


def train(
    model: GnnModel,
    cfg: TrainConfig,
    dataset: Optional[Dataset] = None,
    out_dir: Optional[Union[str, Path]] = None,
    resume_from: Optional[Union[str, Path]] = None,
    provenance: Optional[Dict[str, Any]] = None,
) -> Tuple[GnnModel, TrainingLog]:
    """
    모델 학습 후 (최적 모델, 로그) 반환

    dataset이 없으면 cfg.dataset (매니페스트 경로 또는 생성기 명세)에서 구성합니다.
    """
    if dataset is None:
        source = cfg.dataset.get("path") or cfg.dataset
        dataset = load_dataset(source, mode=cfg.mode, seed=cfg.seed, max_validation=cfg.validation_samples)
    return Trainer(cfg, dataset, out_dir=out_dir, provenance=provenance).fit(model, resume_from=resume_from)

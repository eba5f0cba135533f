"""학습 모듈"""

from .optimizer import AdamState, NonFiniteGradientError, adam_step, lr_schedule
from .dataset import (
    Dataset,
    DatasetSpec,
    MatrixEntry,
    TrainingSample,
    SPLITS,
    load_dataset,
    load_split,
    plan_entries,
    read_manifest,
    rhs_vector,
    write_dataset,
)
from .trainer import (
    TrainConfig,
    Trainer,
    TrainingLog,
    build_factor,
    sample_loss_and_grad,
    select_best_epoch,
    train,
)

__all__ = [
    "AdamState",
    "NonFiniteGradientError",
    "adam_step",
    "lr_schedule",
    "Dataset",
    "DatasetSpec",
    "MatrixEntry",
    "TrainingSample",
    "SPLITS",
    "load_dataset",
    "load_split",
    "plan_entries",
    "read_manifest",
    "rhs_vector",
    "write_dataset",
    "TrainConfig",
    "Trainer",
    "TrainingLog",
    "build_factor",
    "sample_loss_and_grad",
    "select_best_epoch",
    "train",
]

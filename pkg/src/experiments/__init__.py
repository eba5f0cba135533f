"""실험 명령 모듈"""

from .config import CONFIG_ENV, ExperimentConfig, load_config, resolve_config
from .reporting import read_table, write_table
from .benchmark import BenchmarkSettings, evaluate_matrices, run_method, summarize
from .commands import (
    COMMANDS,
    cmd_gen,
    cmd_train,
    cmd_eval,
    cmd_crossscale,
    cmd_dropout,
    cmd_analyze,
)

__all__ = [
    "CONFIG_ENV",
    "ExperimentConfig",
    "load_config",
    "resolve_config",
    "read_table",
    "write_table",
    "BenchmarkSettings",
    "evaluate_matrices",
    "run_method",
    "summarize",
    "COMMANDS",
    "cmd_gen",
    "cmd_train",
    "cmd_eval",
    "cmd_crossscale",
    "cmd_dropout",
    "cmd_analyze",
]

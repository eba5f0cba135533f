"""GNN 모듈"""

from .model import (
    GnnConfig,
    GnnModel,
    MessageBlock,
    ForwardTrace,
    GnnNumericError,
    init_model,
    init_correction_model,
    zero_model,
    gnn_forward,
    gnn_forward_traced,
    gnn_backward,
    assemble_factor,
    extract_edge_values,
)
from .checkpoint import CheckpointError, save_checkpoint, load_checkpoint

__all__ = [
    "GnnConfig",
    "GnnModel",
    "MessageBlock",
    "ForwardTrace",
    "GnnNumericError",
    "init_model",
    "init_correction_model",
    "zero_model",
    "gnn_forward",
    "gnn_forward_traced",
    "gnn_backward",
    "assemble_factor",
    "extract_edge_values",
    "CheckpointError",
    "save_checkpoint",
    "load_checkpoint",
]

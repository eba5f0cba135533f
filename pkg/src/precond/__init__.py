"""전처리기 모듈"""

from .preconditioners import (
    PrecondKind,
    Preconditioner,
    IcBreakdownError,
    FACTOR_KINDS,
    identity_preconditioner,
    jacobi,
    ic0,
    ic0_factor,
    gnn_ic_factor,
    nic_predict,
    gnn_ic_predict,
    fill_in_dropout,
    dropout_eps_for_reduction,
    build_preconditioner,
    export_factor,
)
from .error_analysis import relative_errors, factor_relative_error

__all__ = [
    "PrecondKind",
    "Preconditioner",
    "IcBreakdownError",
    "FACTOR_KINDS",
    "identity_preconditioner",
    "jacobi",
    "ic0",
    "ic0_factor",
    "gnn_ic_factor",
    "nic_predict",
    "gnn_ic_predict",
    "fill_in_dropout",
    "dropout_eps_for_reduction",
    "build_preconditioner",
    "export_factor",
    "relative_errors",
    "factor_relative_error",
]

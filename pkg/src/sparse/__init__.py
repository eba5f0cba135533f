"""희소 행렬 모듈"""

from .matrix import (
    SparseCoo,
    SparseCsr,
    LowerFactor,
    SparseFormatError,
    FactorError,
    coo_to_csr,
    csr_to_coo,
    csr_matvec,
    transpose,
    permute_symmetric,
    lower_triangle,
    scale_by_std,
)
from .scatter import index_select, scatter_sum
from .generators import FAMILIES, derive_seed, gen_family, gen_poisson
from .matrix_market import MatrixMarketError, read_matrix_market, write_matrix_market

__all__ = [
    "SparseCoo",
    "SparseCsr",
    "LowerFactor",
    "SparseFormatError",
    "FactorError",
    "coo_to_csr",
    "csr_to_coo",
    "csr_matvec",
    "transpose",
    "permute_symmetric",
    "lower_triangle",
    "scale_by_std",
    "index_select",
    "scatter_sum",
    "gen_poisson",
    "gen_family",
    "derive_seed",
    "FAMILIES",
    "MatrixMarketError",
    "read_matrix_market",
    "write_matrix_market",
]

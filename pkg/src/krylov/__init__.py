"""Krylov 반복 해법 모듈"""

from .triangular import TriangularSolveError, tri_solve_lower, tri_solve_upper
from .solvers import SolveConfig, SolveReport, apply_preconditioner, cg, pcg

__all__ = [
    "TriangularSolveError",
    "tri_solve_lower",
    "tri_solve_upper",
    "SolveConfig",
    "SolveReport",
    "apply_preconditioner",
    "cg",
    "pcg",
]

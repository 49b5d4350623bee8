"""Abstract conic programs and the embedded cone solver."""

from .program import (
    Affine,
    ConicProgram,
    ConstraintBlock,
    VariableBlock,
    block_hermitian,
    concat,
    hermitize,
    scale_matrix,
)
from .solver import (
    INFEASIBLE,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    SolveResult,
    lower_complex,
    solve,
)
from .check import ViolationReport, check_solution, dump_program

__all__ = [
    "Affine",
    "ConicProgram",
    "ConstraintBlock",
    "VariableBlock",
    "block_hermitian",
    "concat",
    "hermitize",
    "scale_matrix",
    "SolveResult",
    "solve",
    "lower_complex",
    "check_solution",
    "dump_program",
    "ViolationReport",
    "OPTIMAL",
    "INFEASIBLE",
    "UNBOUNDED",
    "NUMERICAL_FAILURE",
]

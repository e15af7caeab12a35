from .bilinear import bilinear_solve, mccormick_envelope
from .lp import lp_solve
from .milp import milp_solve
from .problems import (
    EQ,
    GE,
    LE,
    BilinearProgram,
    BilinearTerm,
    LinConstraint,
    LinearProgram,
    MilpProblem,
    ProblemBuilder,
    SolveResult,
    Status,
    write_lp_text,
)

__all__ = [
    "EQ",
    "GE",
    "LE",
    "BilinearProgram",
    "BilinearTerm",
    "LinConstraint",
    "LinearProgram",
    "MilpProblem",
    "ProblemBuilder",
    "SolveResult",
    "Status",
    "bilinear_solve",
    "lp_solve",
    "mccormick_envelope",
    "milp_solve",
    "write_lp_text",
]

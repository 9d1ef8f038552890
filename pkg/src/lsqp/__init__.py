"""SQP and logspace SQP for constrained NLPs in unit-RHS standard form."""
from .problem import (
    Evaluation,
    KnownOptimum,
    Problem,
    RawConstraint,
    RawProblemDescription,
    ScalarFunction,
    TransformFailure,
    check_positivity,
    construct_standard_form,
    evaluate_point,
)
from .sqp import SolveResult, SolverOptions, Termination
from . import lsqp as _lsqp_engine
from . import sqp as _sqp_engine

__version__ = "0.1.0"


def solve_sqp(problem, x0, options=None):
    return _sqp_engine.solve(problem, x0, options)


def solve_lsqp(problem, x0, options=None):
    return _lsqp_engine.solve(problem, x0, options)


__all__ = [
    "Evaluation", "KnownOptimum", "Problem", "RawConstraint", "RawProblemDescription",
    "ScalarFunction", "SolveResult", "SolverOptions", "Termination", "TransformFailure",
    "check_positivity", "construct_standard_form", "evaluate_point", "solve_lsqp", "solve_sqp",
]

"""Logspace SQP.

Sub-problems are built in y = log x from ordinary black-box evaluations:
values are logged and each gradient is mapped through

    d log F(e^y) / d y_i = x_i / F(x) * dF/dx_i

so the user's functions never see the transformation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import sqp
from .problem import Evaluation, Problem, TransformFailure, check_positivity
from .qp import QpData
from .sqp import BfgsState, LocalModel, SolveResult, SolverOptions


@dataclass
class LogEvaluation:
    y: np.ndarray
    log_f: float
    log_grad_f: np.ndarray
    log_g: np.ndarray
    log_grad_g: np.ndarray
    log_h: np.ndarray
    log_grad_h: np.ndarray


def log_gradient(x, value, grad):
    """Gradient of log F(exp(y)) with respect to y."""
    return np.asarray(x) * np.asarray(grad) / value


def log_transform(ev: Evaluation) -> LogEvaluation:
    report = check_positivity(ev)
    if report:
        detail = ", ".join(f"{lab}={val:.6g}" for lab, val in report.offenders)
        raise TransformFailure(f"non-positive at x={ev.x}: {detail}", report.offenders)
    x = ev.x
    lev = LogEvaluation(
        y=np.log(x),
        log_f=float(np.log(ev.f)),
        log_grad_f=x * ev.grad_f / ev.f,
        log_g=np.log(ev.g),
        log_grad_g=ev.grad_g * x[None, :] / ev.g[:, None],
        log_h=np.log(ev.h),
        log_grad_h=ev.grad_h * x[None, :] / ev.h[:, None],
    )
    ev.log = lev
    return lev


def build_log_subproblem(lev: LogEvaluation, B: BfgsState) -> QpData:
    """QP in log coordinates; the unit RHS becomes 0, so constants are the logged values."""
    return QpData.build(B.B, lev.log_grad_f, lev.log_grad_g, lev.log_g, lev.log_grad_h, lev.log_h)


class LogSpace:
    """Internal coordinates z = log x with logged objective and constraints."""

    name = "lsqp"

    def to_internal(self, x):
        return np.log(np.asarray(x, dtype=float))

    def to_x(self, z):
        return np.exp(np.asarray(z, dtype=float))

    def floors(self, problem):
        return np.asarray(problem.lower_bounds, dtype=float)

    def model(self, ev: Evaluation) -> LocalModel:
        lev = log_transform(ev)
        return LocalModel(z=lev.y, x=ev.x, f=lev.log_f, grad_f=lev.log_grad_f,
                          c=lev.log_g, grad_c=lev.log_grad_g, e=lev.log_h, grad_e=lev.log_grad_h,
                          ev=ev)

    def trust_box(self, z, frac):
        n = np.size(z)
        lo = np.full(n, np.log1p(-frac) if frac < 1.0 else -np.inf)
        hi = np.full(n, np.log1p(frac))
        return lo, hi


def solve(problem: Problem, x0, options: SolverOptions | None = None) -> SolveResult:
    """Logspace SQP from x0; x0 and every iterate must keep f, g, h positive."""
    return sqp.run(problem, x0, options or SolverOptions(), LogSpace())

"""SQP driver with damped BFGS and an l1-merit backtracking line search.

The driver works in "internal" coordinates z with constraints ``c(z) <= 0``
and ``e(z) == 0``. Classical SQP uses z = x and c = g - 1; the logspace
variant (see :mod:`lsqp.lsqp`) plugs in z = log x and c = log g.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from . import kernels
from .problem import Evaluation, NonFiniteEvaluation, Problem, TransformFailure, evaluate_point
from .qp import NumericalBreakdown, QpData, QpStatus, solve_qp, solve_qp_elastic

log = logging.getLogger(__name__)

ARMIJO = 1e-4
BACKTRACK = 0.5
MAX_BACKTRACKS = 25
PENALTY_RULES = ("powell", "monotone")


class Termination(str, Enum):
    GRAD_LAGRANGIAN = "GradLagrangian"
    SMALL_STEP = "SmallStep"
    MAX_ITER = "MaxIter"
    LINE_SEARCH_FAILURE = "LineSearchFailure"
    TRANSFORM_FAILURE = "TransformFailure"
    QP_FAILURE = "QpFailure"

    @property
    def converged(self):
        return self in (Termination.GRAD_LAGRANGIAN, Termination.SMALL_STEP)


class LineSearchFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 500
    eps_grad_lagrangian: float = 1e-6
    eps_step: float = 1e-8
    eps_feasibility: float = 1e-6
    trust_fractions: tuple = ()
    enforce_positivity_in_linesearch: bool = False
    merit_penalty_init: float = 1.0
    penalty_rule: str = "powell"
    strict_kkt: bool = False  # also require complementarity |mu_i c_i| < eps_grad_lagrangian

    def __post_init__(self):
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if min(self.eps_grad_lagrangian, self.eps_step, self.eps_feasibility) <= 0:
            raise ValueError("tolerances must be positive")
        tf = tuple(float(t) for t in self.trust_fractions)
        if any(not 0 < t <= 1 for t in tf):
            raise ValueError("trust fractions must lie in (0, 1]")
        object.__setattr__(self, "trust_fractions", tf)
        if self.penalty_rule not in PENALTY_RULES:
            raise ValueError(f"penalty_rule must be one of {PENALTY_RULES}")

    def merged(self, **overrides):
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})


@dataclass
class IterateRecord:
    x: np.ndarray
    f: float
    merit: float
    step_norm: float
    violation: float
    merit_start: float = float("nan")  # previous point, same penalty as ``merit``


@dataclass
class SolveResult:
    x_final: np.ndarray
    f_final: float
    iterations: int
    termination: Termination
    trace: list = field(default_factory=list)
    multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bound_multipliers: np.ndarray = field(default_factory=lambda: np.zeros(0))
    message: str = ""

    @property
    def converged(self):
        return self.termination.converged


@dataclass
class BfgsState:
    B: np.ndarray
    skipped: bool = False

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))


def damped_bfgs_update(state: BfgsState, s, y) -> BfgsState:
    """Powell-damped BFGS; B stays symmetric positive definite.

    A degenerate step (s'Bs <= 1e-14), or an update whose result is
    numerically indefinite after diagonal scaling, returns B unchanged with
    ``skipped=True`` rather than raising.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    if not np.any(s):
        raise ValueError("s must be nonzero")
    B, _theta, skipped = kernels.damped_bfgs(np.ascontiguousarray(state.B), s, y)
    return BfgsState(B, bool(skipped))


# --- local models -----------------------------------------------------------

@dataclass
class LocalModel:
    """Objective and constraints at one point, in internal coordinates."""

    z: np.ndarray
    x: np.ndarray
    f: float
    grad_f: np.ndarray
    c: np.ndarray        # c(z) <= 0
    grad_c: np.ndarray
    e: np.ndarray        # e(z) == 0
    grad_e: np.ndarray
    ev: Evaluation

    def violations(self):
        return np.concatenate([np.maximum(self.c, 0.0), np.abs(self.e)])

    def violation(self):
        return float(np.sum(self.violations()))

    def max_violation(self):
        return float(max(np.max(self.c, initial=0.0), np.max(np.abs(self.e), initial=0.0)))

    def merit(self, penalty):
        """l1 merit; ``penalty`` is a scalar or one weight per constraint."""
        return self.f + float(np.sum(penalty * self.violations()))


class LinearSpace:
    """Original coordinates: z = x, constraints g - 1 <= 0, h - 1 == 0."""

    name = "sqp"

    def to_internal(self, x):
        return np.array(x, dtype=float)

    def to_x(self, z):
        return np.array(z, dtype=float)

    def floors(self, problem):
        return np.asarray(problem.lower_bounds, dtype=float)

    def model(self, ev: Evaluation) -> LocalModel:
        return LocalModel(z=ev.x.copy(), x=ev.x, f=ev.f, grad_f=ev.grad_f,
                          c=ev.g - 1.0, grad_c=ev.grad_g, e=ev.h - 1.0, grad_e=ev.grad_h, ev=ev)

    def trust_box(self, z, frac):
        x = self.to_x(z)
        return -frac * np.abs(x), frac * np.abs(x)


def build_subproblem(ev: Evaluation, B: BfgsState) -> QpData:
    """QP in the original variables: H = B, linearized g - 1 and h - 1."""
    return QpData.build(B.B, ev.grad_f, ev.grad_g, ev.g - 1.0, ev.grad_h, ev.h - 1.0)


def _model_qp(m: LocalModel, B, floors_z, trust):
    """QP from a local model plus hard bound and trust-region rows."""
    n = m.z.size
    A_in = [m.grad_c, -np.eye(n)]
    b_in = [m.c, floors_z - m.z]
    hard = [np.zeros(m.c.size, dtype=bool), np.ones(n, dtype=bool)]
    if trust is not None:
        lo, hi = trust
        up = np.isfinite(hi)
        dn = np.isfinite(lo)
        A_in += [np.eye(n)[up], -np.eye(n)[dn]]
        b_in += [-hi[up], lo[dn]]
        hard += [np.ones(up.sum(), dtype=bool), np.ones(dn.sum(), dtype=bool)]
    return QpData.build(B, m.grad_f, np.vstack(A_in), np.concatenate(b_in),
                        m.grad_e, m.e, np.concatenate(hard))


def grad_lagrangian(m: LocalModel, mu_c, mu_e, mu_b):
    return m.grad_f + m.grad_c.T @ mu_c + m.grad_e.T @ mu_e - mu_b


def _make_model(space, problem, z):
    x = space.to_x(z)
    ev = evaluate_point(problem, x)
    return space.model(ev)


def line_search(problem, space, m: LocalModel, d, penalty, options, lin_violation):
    """Armijo backtracking on the l1 merit. Returns (alpha, model_next).

    ``lin_violation`` is the l1 violation of the linearized constraints at
    the full step; with it the merit directional derivative is exact for
    both feasible and elastic QP steps.
    """
    phi0 = m.merit(penalty)
    slope = float(m.grad_f @ d) + float(np.sum(penalty * (lin_violation - m.violations())))
    slack = 8 * np.finfo(float).eps * max(1.0, abs(phi0))
    alpha = 1.0
    for _ in range(MAX_BACKTRACKS + 1):
        z_t = m.z + alpha * d
        try:
            m_t = _make_model(space, problem, z_t)
        except NonFiniteEvaluation:
            m_t = None
        except TransformFailure:
            if not options.enforce_positivity_in_linesearch:
                raise
            m_t = None
        if m_t is not None and m_t.merit(penalty) <= phi0 + ARMIJO * alpha * slope + slack:
            return alpha, m_t
        alpha *= BACKTRACK
    raise LineSearchFailure(f"no sufficient decrease after {MAX_BACKTRACKS} backtracks")


def _lin_violation(m: LocalModel, d):
    return np.concatenate([np.maximum(m.c + m.grad_c @ d, 0.0), np.abs(m.e + m.grad_e @ d)])


def update_penalty(penalty, mu_qp, rule):
    """Merit weights that keep a QP step a descent direction.

    "monotone": one scalar, never decreased. "powell": one weight per
    constraint, r = max(1.1|mu|, (r + 1.1|mu|)/2), so weights inflated by an
    early poor multiplier estimate can relax again.
    """
    need = 1.1 * np.abs(mu_qp)
    if rule == "monotone":
        return max(float(np.max(penalty)), float(np.max(need, initial=0.0)))
    return np.maximum(need, 0.5 * (penalty + need))


def _kkt_met(m: LocalModel, gl, mu_c, mu_b, floors_z, eps_gl, eps_feas, strict):
    """Small gradient of the Lagrangian at a feasible point (plus complementarity if strict)."""
    if np.max(np.abs(gl), initial=0.0) >= eps_gl or m.max_violation() > eps_feas:
        return False
    if not strict:
        return True
    comp = max(np.max(np.abs(mu_c * m.c), initial=0.0),
               np.max(np.abs(mu_b * (floors_z - m.z)), initial=0.0))
    return comp < eps_gl


def run(problem: Problem, x0, options: SolverOptions, space) -> SolveResult:
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (problem.n_vars,):
        raise ValueError(f"x0 must have length {problem.n_vars}")
    if np.any(x0 < problem.lower_bounds):
        raise ValueError("x0 violates the variable floors")
    n = problem.n_vars
    floors_z = space.to_internal(space.floors(problem))
    z = space.to_internal(x0)

    def result(m, k, term, trace, mu, mu_b, msg=""):
        if m is None:
            x = space.to_x(z)
            try:
                f = evaluate_point(problem, x).f
            except NonFiniteEvaluation:
                f = float("nan")
        else:
            x, f = m.x, m.ev.f
        return SolveResult(x_final=np.array(x), f_final=float(f), iterations=k, termination=term,
                           trace=trace, multipliers=mu, bound_multipliers=mu_b, message=msg)

    mu = np.ones(problem.n_ineq + problem.n_eq)
    mu_b = np.zeros(n)
    try:
        m = _make_model(space, problem, z)
    except TransformFailure as exc:
        rec = IterateRecord(x0.copy(), float("nan"), float("nan"), 0.0, float("nan"))
        return result(None, 0, Termination.TRANSFORM_FAILURE, [rec], mu, mu_b, exc.detail)
    penalty = float(options.merit_penalty_init)
    if options.penalty_rule == "powell":
        penalty = np.full(problem.n_ineq + problem.n_eq, penalty)
    B = BfgsState.identity(n)
    trace = [IterateRecord(m.x.copy(), m.ev.f, m.merit(penalty), 0.0, m.max_violation())]
    n_in = problem.n_ineq
    eps_gl, eps_feas = options.eps_grad_lagrangian, options.eps_feasibility
    strict = options.strict_kkt

    for k in range(options.max_iter):
        trust = None
        if k < len(options.trust_fractions):
            trust = space.trust_box(m.z, options.trust_fractions[k])
        qp = _model_qp(m, B.B, floors_z, trust)
        try:
            sol = solve_qp(qp)
            if sol.status == QpStatus.INFEASIBLE:
                sol = solve_qp_elastic(qp, max(float(np.max(penalty, initial=0.0)), 1.0))
            if sol.status != QpStatus.OPTIMAL:
                raise NumericalBreakdown(f"QP status {sol.status.value}")
        except NumericalBreakdown:
            B = BfgsState.identity(n)
            try:
                qp = _model_qp(m, B.B, floors_z, trust)
                sol = solve_qp(qp)
                if sol.status == QpStatus.INFEASIBLE:
                    sol = solve_qp_elastic(qp, max(float(np.max(penalty, initial=0.0)), 1.0))
                if sol.status != QpStatus.OPTIMAL:
                    raise NumericalBreakdown(f"QP status {sol.status.value}")
            except NumericalBreakdown as exc:
                return result(m, k, Termination.QP_FAILURE, trace, mu, mu_b, str(exc))

        d = sol.d
        mu_qp = np.concatenate([sol.mu_ineq[:n_in], sol.mu_eq])
        mu_b_qp = sol.mu_ineq[n_in:n_in + n]

        # KKT at the current point with the QP multipliers (d ~ 0 case)
        gl_here = grad_lagrangian(m, sol.mu_ineq[:n_in], sol.mu_eq, mu_b_qp)
        if _kkt_met(m, gl_here, sol.mu_ineq[:n_in], mu_b_qp, floors_z, eps_gl, eps_feas, strict):
            return result(m, k, Termination.GRAD_LAGRANGIAN, trace, mu_qp, mu_b_qp)

        penalty = update_penalty(penalty, mu_qp, options.penalty_rule)
        merit_start = m.merit(penalty)
        try:
            alpha, m_new = line_search(problem, space, m, d, penalty, options, _lin_violation(m, d))
        except LineSearchFailure as exc:
            return result(m, k, Termination.LINE_SEARCH_FAILURE, trace, mu, mu_b, str(exc))
        except TransformFailure as exc:
            return result(m, k, Termination.TRANSFORM_FAILURE, trace, mu, mu_b, exc.detail)

        mu = mu + alpha * (mu_qp - mu)
        mu_b = mu_b + alpha * (mu_b_qp - mu_b)
        mu_c, mu_e = mu[:n_in], mu[n_in:]
        step = alpha * d
        gl_new = grad_lagrangian(m_new, mu_c, mu_e, mu_b)
        gl_old = grad_lagrangian(m, mu_c, mu_e, mu_b)
        step_norm = float(np.linalg.norm(step))
        trace.append(IterateRecord(m_new.x.copy(), m_new.ev.f, m_new.merit(penalty),
                                   step_norm, m_new.max_violation(), merit_start))
        m_prev, m = m, m_new
        if _kkt_met(m, gl_new, mu_c, mu_b, floors_z, eps_gl, eps_feas, strict):
            return result(m, k + 1, Termination.GRAD_LAGRANGIAN, trace, mu, mu_b)
        if step_norm < options.eps_step:
            return result(m, k + 1, Termination.SMALL_STEP, trace, mu, mu_b)
        B = damped_bfgs_update(B, m.z - m_prev.z, gl_new - gl_old)
    return result(m, options.max_iter, Termination.MAX_ITER, trace, mu, mu_b,
                  "maximum iteration count reached")


def solve(problem: Problem, x0, options: SolverOptions | None = None) -> SolveResult:
    """Classical SQP in the original variables."""
    return run(problem, x0, options or SolverOptions(), LinearSpace())

"""Problems in unit-RHS standard form and the black-box evaluation contract.

Every constraint is written ``g_i(x) <= 1`` or ``h_j(x) == 1``. Functions are
opaque callables returning ``(value, gradient)``; solvers never look inside.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

DEFAULT_FLOOR = 1e-6


class NonFiniteEvaluation(ArithmeticError):
    """A function returned NaN/Inf at the requested point."""


class TransformFailure(ArithmeticError):
    """Objective or a constraint is not strictly positive, so its log is undefined."""

    def __init__(self, detail, offenders=()):
        super().__init__(detail)
        self.detail = detail
        self.offenders = tuple(offenders)


class UnnormalizableConstraint(ValueError):
    pass


class MissingConstants(KeyError):
    pass


@dataclass(frozen=True)
class ScalarFunction:
    """A black-box ``x -> (value, gradient)`` evaluator.

    ``kind`` is an optional structural tag ("monomial", "posynomial",
    "signomial" or "opaque") used only by the compatibility scan.
    """

    func: Callable[[np.ndarray], tuple]
    kind: str = "opaque"
    name: str = ""

    def __call__(self, x):
        val, grad = self.func(x)
        return float(val), np.asarray(grad, dtype=float)


@dataclass(frozen=True)
class KnownOptimum:
    objective_value: float
    x_star: np.ndarray
    published: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Problem:
    n_vars: int
    objective: ScalarFunction
    ineq_constraints: tuple = ()
    eq_constraints: tuple = ()
    lower_bounds: np.ndarray | None = None
    variable_names: tuple = ()
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.n_vars < 1:
            raise ValueError("n_vars must be >= 1")
        lb = self.lower_bounds
        lb = np.full(self.n_vars, DEFAULT_FLOOR) if lb is None else np.asarray(lb, dtype=float).copy()
        if lb.shape != (self.n_vars,) or np.any(lb <= 0):
            raise ValueError("lower_bounds must be n_vars strictly positive floors")
        lb.setflags(write=False)
        object.__setattr__(self, "lower_bounds", lb)
        object.__setattr__(self, "ineq_constraints", tuple(self.ineq_constraints))
        object.__setattr__(self, "eq_constraints", tuple(self.eq_constraints))
        names = tuple(self.variable_names) or tuple(f"x{i + 1}" for i in range(self.n_vars))
        if len(names) != self.n_vars:
            raise ValueError("variable_names length must equal n_vars")
        object.__setattr__(self, "variable_names", names)

    @property
    def n_ineq(self):
        return len(self.ineq_constraints)

    @property
    def n_eq(self):
        return len(self.eq_constraints)


@dataclass
class Evaluation:
    x: np.ndarray
    f: float
    grad_f: np.ndarray
    g: np.ndarray
    grad_g: np.ndarray
    h: np.ndarray
    grad_h: np.ndarray
    log: "object | None" = None  # LogEvaluation once transformed


def _eval_many(funcs, x, n):
    vals = np.empty(len(funcs))
    grads = np.empty((len(funcs), n))
    for i, fn in enumerate(funcs):
        vals[i], grads[i] = fn(x)
    return vals, grads


def evaluate_point(problem: Problem, x) -> Evaluation:
    """Evaluate objective and all constraints (values and gradients) at x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (problem.n_vars,):
        raise ValueError(f"expected a point of length {problem.n_vars}, got shape {x.shape}")
    f, gf = problem.objective(x)
    if gf.shape != (problem.n_vars,):
        raise ValueError("objective gradient has wrong length")
    g, Jg = _eval_many(problem.ineq_constraints, x, problem.n_vars)
    h, Jh = _eval_many(problem.eq_constraints, x, problem.n_vars)
    for arr in (gf, g, Jg, h, Jh):
        if not np.all(np.isfinite(arr)):
            raise NonFiniteEvaluation(f"non-finite value or gradient at x={x}")
    if not np.isfinite(f):
        raise NonFiniteEvaluation(f"non-finite objective at x={x}")
    return Evaluation(x=x.copy(), f=f, grad_f=gf, g=g, grad_g=Jg, h=h, grad_h=Jh)


@dataclass(frozen=True)
class PositivityReport:
    offenders: tuple  # (label, value) pairs

    @property
    def ok(self):
        return not self.offenders

    def __bool__(self):
        return bool(self.offenders)

    def labels(self):
        return [lab for lab, _ in self.offenders]


def check_positivity(ev: Evaluation) -> PositivityReport:
    """List every function among f, g_i, h_j whose value is not strictly positive."""
    bad = []
    if not ev.f > 0:
        bad.append(("f", ev.f))
    bad += [(f"g{i + 1}", float(v)) for i, v in enumerate(ev.g) if not v > 0]
    bad += [(f"h{j + 1}", float(v)) for j, v in enumerate(ev.h) if not v > 0]
    return PositivityReport(tuple(bad))


def max_violation(ev: Evaluation) -> float:
    v = 0.0
    if ev.g.size:
        v = max(v, float(np.max(ev.g - 1.0)))
    if ev.h.size:
        v = max(v, float(np.max(np.abs(ev.h - 1.0))))
    return v


# --- standard-form construction -------------------------------------------

@dataclass(frozen=True)
class RawConstraint:
    """``lhs <relation> rhs``; rhs is a number or a ScalarFunction."""

    lhs: ScalarFunction
    relation: str  # "<=", ">=", "=="
    rhs: "float | ScalarFunction"


def _scaled(fn: ScalarFunction, scale: float, kind=None) -> ScalarFunction:
    def inner(x):
        v, g = fn(x)
        return v * scale, g * scale

    return ScalarFunction(inner, kind if kind is not None else fn.kind, fn.name)


def _shifted(fn: ScalarFunction, sign: float) -> ScalarFunction:
    def inner(x):
        v, g = fn(x)
        return sign * v + 1.0, sign * g

    return ScalarFunction(inner, "signomial" if fn.kind != "opaque" else "opaque", fn.name)


def _ratio(num: ScalarFunction, den: ScalarFunction) -> ScalarFunction:
    def inner(x):
        a, ga = num(x)
        b, gb = den(x)
        return a / b, (ga * b - a * gb) / (b * b)

    kind = "monomial" if num.kind == den.kind == "monomial" else "opaque"
    return ScalarFunction(inner, kind, num.name)


def _difference(a: ScalarFunction, b: ScalarFunction) -> ScalarFunction:
    def inner(x):
        va, ga = a(x)
        vb, gb = b(x)
        return va - vb, ga - gb

    kind = "opaque" if "opaque" in (a.kind, b.kind) else "signomial"
    return ScalarFunction(inner, kind, a.name)


def normalize_constraint(raw: RawConstraint) -> tuple[ScalarFunction, str]:
    """Rewrite one raw constraint to ``fn <= 1`` or ``fn == 1``.

    Constant RHS: divide through. Single positive terms on both sides of a
    relation: ratio form. Otherwise move everything left and add 1.
    """
    rel = raw.relation
    if rel not in ("<=", ">=", "=="):
        raise ValueError(f"unknown relation {rel!r}")
    lhs, rhs = raw.lhs, raw.rhs
    if isinstance(rhs, ScalarFunction):
        if lhs.kind == "monomial" and rhs.kind == "monomial":
            if rel == ">=":
                return _ratio(rhs, lhs), "<="
            return _ratio(lhs, rhs), rel
        lhs, rhs = _difference(lhs, rhs), 0.0
    rhs = float(rhs)
    if rhs == 0.0:
        if rel == ">=":
            raise UnnormalizableConstraint(
                "expr >= 0 has no shifted form with a positive-oriented left side")
        return _shifted(lhs, 1.0), rel
    if rel == ">=":
        if rhs < 0:
            # expr >= c  <=>  expr/c <= 1 for negative c
            return _scaled(lhs, 1.0 / rhs), "<="
        def inner(x, lhs=lhs, c=rhs):
            v, g = lhs(x)
            return c / v, -c * g / (v * v)
        kind = lhs.kind if lhs.kind == "monomial" else "opaque"
        return ScalarFunction(inner, kind, lhs.name), "<="
    if rel == "<=" and rhs < 0:
        # expr <= c < 0  <=>  expr/c >= 1  <=>  2 - expr/c <= 1
        def flipped(x, lhs=lhs, c=rhs):
            v, g = lhs(x)
            return 2.0 - v / c, -g / c
        kind = "signomial" if lhs.kind != "opaque" else "opaque"
        return ScalarFunction(flipped, kind, lhs.name), "<="
    return _scaled(lhs, 1.0 / rhs), rel


@dataclass(frozen=True)
class RawProblemDescription:
    n_vars: int
    objective: ScalarFunction
    constraints: Sequence[RawConstraint]
    lower_bounds: "np.ndarray | None" = None
    variable_names: Sequence[str] = ()
    metadata: dict = field(default_factory=dict)


def construct_standard_form(raw: RawProblemDescription) -> Problem:
    ineq, eq = [], []
    for rc in raw.constraints:
        fn, rel = normalize_constraint(rc)
        (eq if rel == "==" else ineq).append(fn)
    return Problem(
        n_vars=raw.n_vars,
        objective=raw.objective,
        ineq_constraints=ineq,
        eq_constraints=eq,
        lower_bounds=raw.lower_bounds,
        variable_names=tuple(raw.variable_names),
        metadata=dict(raw.metadata),
    )


# --- JSON problem descriptions ---------------------------------------------

DESCRIPTION_SCHEMA_VERSION = 1


def load_description(path_or_dict) -> dict:
    """Read a JSON problem description: benchmark name, constants, floors."""
    if isinstance(path_or_dict, dict):
        data = dict(path_or_dict)
    else:
        with open(path_or_dict) as fh:
            data = json.load(fh)
    version = data.get("schema_version", DESCRIPTION_SCHEMA_VERSION)
    if version != DESCRIPTION_SCHEMA_VERSION:
        raise ValueError(f"unsupported problem description schema_version {version}")
    data.setdefault("constants", {})
    data.setdefault("lower_bounds", {})
    return data

"""Monomial / posynomial / signomial algebra and the GP-compatibility scan."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .problem import Problem, ScalarFunction

GP_COMPATIBLE = ("monomial", "posynomial")
KINDS = ("monomial", "posynomial", "signomial", "opaque")


@dataclass(frozen=True)
class Monomial:
    coefficient: float
    exponents: np.ndarray

    def __post_init__(self):
        if not self.coefficient > 0:
            raise ValueError("monomial coefficient must be positive")
        object.__setattr__(self, "exponents", np.asarray(self.exponents, dtype=float))

    def __call__(self, x):
        return eval_monomial(self, x)

    def __mul__(self, other):
        if isinstance(other, Monomial):
            return Monomial(self.coefficient * other.coefficient, self.exponents + other.exponents)
        return Monomial(self.coefficient * float(other), self.exponents)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, Monomial):
            return Monomial(self.coefficient / other.coefficient, self.exponents - other.exponents)
        return Monomial(self.coefficient / float(other), self.exponents)

    def __pow__(self, p):
        return Monomial(self.coefficient ** p, self.exponents * p)

    def __add__(self, other):
        return Posynomial([self]) + other

    def function(self, name=""):
        return ScalarFunction(self, "monomial", name)


def eval_monomial(m: Monomial, x):
    """value = c prod x_i^a_i, gradient_i = a_i value / x_i."""
    x = np.asarray(x, dtype=float)
    value = m.coefficient * float(np.prod(x ** m.exponents))
    return value, m.exponents * value / x


def var(i, n, coefficient=1.0):
    """The monomial ``coefficient * x_i`` in n variables."""
    a = np.zeros(n)
    a[i] = 1.0
    return Monomial(coefficient, a)


@dataclass(frozen=True)
class Posynomial:
    terms: tuple

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ValueError("posynomial needs at least one term")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "_coef", np.array([t.coefficient for t in terms]))
        object.__setattr__(self, "_exp", np.vstack([t.exponents for t in terms]))

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        vals = self._coef * np.exp(self._exp @ np.log(x))
        return float(vals.sum()), (vals @ self._exp) / x

    def __add__(self, other):
        if isinstance(other, Monomial):
            return Posynomial(self.terms + (other,))
        if isinstance(other, Posynomial):
            return Posynomial(self.terms + other.terms)
        return NotImplemented

    def __mul__(self, other):
        if isinstance(other, (Monomial, int, float)):
            return Posynomial(tuple(t * other for t in self.terms))
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        return Posynomial(tuple(t / other for t in self.terms))

    def __sub__(self, other):
        neg = other if isinstance(other, Posynomial) else Posynomial([other])
        return Signomial(self, neg)

    @property
    def kind(self):
        return "monomial" if len(self.terms) == 1 else "posynomial"

    def function(self, name=""):
        return ScalarFunction(self, self.kind, name)


@dataclass(frozen=True)
class Signomial:
    positive_part: Posynomial
    negative_part: Posynomial | None = None

    def __call__(self, x):
        v, g = self.positive_part(x)
        if self.negative_part is not None:
            vn, gn = self.negative_part(x)
            v, g = v - vn, g - gn
        return v, g

    def __truediv__(self, other):
        neg = None if self.negative_part is None else self.negative_part / other
        return Signomial(self.positive_part / other, neg)

    @property
    def kind(self):
        return "signomial" if self.negative_part is not None else self.positive_part.kind

    def function(self, name=""):
        return ScalarFunction(self, self.kind, name)


def monomial_approximation(p: Posynomial | Monomial, x_k) -> Monomial:
    """Best local monomial fit: matches value and every first derivative at x_k.

    Exponents are the logarithmic sensitivities ``x_i/p * dp/dx_i``.
    """
    x_k = np.asarray(x_k, dtype=float)
    if isinstance(p, Monomial):
        return Monomial(p.coefficient, p.exponents.copy())
    val, grad = p(x_k)
    a = x_k * grad / val
    coef = val / float(np.prod(x_k ** a))
    return Monomial(coef, a)


def classify(fn) -> str:
    kind = getattr(fn, "kind", "opaque")
    return kind if kind in KINDS else "opaque"


@dataclass
class CompatibilityReport:
    counts: dict
    n_constraints: int
    n_compatible: int
    fraction: float
    objective_kind: str
    constraint_kinds: list = field(default_factory=list)
    threshold: float = 0.5

    @property
    def constraint_counts(self):
        out = {k: 0 for k in KINDS}
        for kind in self.constraint_kinds:
            out[kind] += 1
        return out

    @property
    def recommend_lsqp(self):
        return self.fraction >= self.threshold

    def to_dict(self):
        return {
            "counts": dict(self.counts),
            "constraint_counts": self.constraint_counts,
            "objective_kind": self.objective_kind,
            "n_functions": self.n_constraints,
            "n_gp_compatible": self.n_compatible,
            "gp_compatible_fraction": self.fraction,
            "threshold": self.threshold,
            "recommend_lsqp": self.recommend_lsqp,
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def gp_compatibility_scan(items, threshold=0.5) -> CompatibilityReport:
    """Count structural classes over the objective and all constraints.

    ``items`` is a Problem, or a sequence of (role, kind) pairs where role is
    "objective", "ineq" or "eq". Signomial or opaque equalities are never
    GP-compatible; monomial equalities are; posynomial equalities are not.
    """
    if isinstance(items, Problem):
        items = ([("objective", classify(items.objective))]
                 + [("ineq", classify(g)) for g in items.ineq_constraints]
                 + [("eq", classify(h)) for h in items.eq_constraints])
    counts = {k: 0 for k in KINDS}
    obj_kind, con_kinds, n_ok = "opaque", [], 0
    for role, kind in items:
        kind = kind if kind in KINDS else "opaque"
        counts[kind] += 1
        ok = kind == "monomial" if role == "eq" else kind in GP_COMPATIBLE
        n_ok += ok
        if role == "objective":
            obj_kind = kind
        else:
            con_kinds.append(kind)
    total = sum(counts.values())
    frac = n_ok / total if total else 0.0
    return CompatibilityReport(counts=counts, n_constraints=total, n_compatible=n_ok,
                               fraction=frac, objective_kind=obj_kind,
                               constraint_kinds=con_kinds, threshold=threshold)

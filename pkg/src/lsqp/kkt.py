"""Independent first-order optimality check for solver endpoints.

Multipliers are refitted from scratch, so the certificate trusts nothing the
solver reports. One nonnegative least-squares problem balances stationarity
against complementarity over every inequality and variable floor:

    min_{lam >= 0} |grad_f + J^T lam|^2 + |lam * c|^2

Equalities enter as a +/- pair. The check runs either in the original
variables (c = g - 1) or in y = log x on logged functions (c = log g); each
solver is certified in the coordinates it actually iterates in.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .problem import Problem, evaluate_point

SPACES = ("log", "linear")


@dataclass(frozen=True)
class KktReport:
    residual: float
    stationarity: float
    violation: float
    complementarity: float
    space: str
    multipliers: np.ndarray


def _fit(grad_f, c, grad_c, e, grad_e):
    n = grad_f.size
    J = np.vstack([grad_c, grad_e, -grad_e])
    cc = np.concatenate([c, np.zeros(2 * e.size)])
    if J.shape[0] == 0:
        return grad_f, np.zeros(0)
    A = np.vstack([J.T, np.diag(cc)])
    rhs = np.concatenate([-grad_f, np.zeros(cc.size)])
    lam, _ = nnls(A, rhs, maxiter=100 * A.shape[1])
    r = grad_f + J.T @ lam
    m = c.size
    mu = np.concatenate([lam[:m], lam[m:m + e.size] - lam[m + e.size:]])
    return r, mu


def kkt_residual(problem: Problem, x, space: str = "log") -> KktReport:
    """max(stationarity, violation, complementarity) at x.

    ``space="log"`` needs f, g, h > 0 at x; it falls back to "linear"
    otherwise. Log-space numbers are scale free; linear ones are absolute,
    in the same units as the solver's gradient-of-Lagrangian test.
    """
    if space not in SPACES:
        raise ValueError(f"space must be one of {SPACES}")
    ev = evaluate_point(problem, x)
    x = ev.x
    n = x.size
    lb = np.asarray(problem.lower_bounds)
    if space == "log" and not (ev.f > 0 and np.all(ev.g > 0) and np.all(ev.h > 0)):
        space = "linear"
    if space == "log":
        gf = x * ev.grad_f / ev.f
        c = np.concatenate([np.log(ev.g), np.log(lb) - np.log(x)])
        Jc = np.vstack([ev.grad_g * x / ev.g[:, None], -np.eye(n)])
        e, Je = np.log(ev.h), ev.grad_h * x / ev.h[:, None]
    else:
        gf = ev.grad_f
        c = np.concatenate([ev.g - 1.0, lb - x])
        Jc = np.vstack([ev.grad_g, -np.eye(n)])
        e, Je = ev.h - 1.0, ev.grad_h
    r, mu = _fit(gf, c, Jc, e, Je)
    mu_c = mu[:c.size]
    stat = float(np.max(np.abs(r), initial=0.0))
    viol = float(max(np.max(c, initial=0.0), np.max(np.abs(e), initial=0.0)))
    comp = float(np.max(np.abs(mu_c * c), initial=0.0))
    return KktReport(max(stat, viol, comp), stat, viol, comp, space, mu)

"""Dense convex QP sub-problem solver.

    minimize    0.5 d'Hd + c'd
    subject to  A_ineq d + b_ineq <= 0
                A_eq d + b_eq = 0

A phase-1 LP (minimum total infeasibility, slacks only on rows violated at
d = 0) finds a feasible start, then the primal active-set kernel takes over.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels


class DimensionMismatch(ValueError):
    pass


class NumericalBreakdown(ArithmeticError):
    pass


class QpStatus(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    ITER_LIMIT = "IterLimit"


@dataclass
class QpData:
    H: np.ndarray
    c: np.ndarray
    A_ineq: np.ndarray
    b_ineq: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    # rows that elastic mode must never relax (bounds, trust region)
    hard_ineq: np.ndarray | None = None

    @classmethod
    def build(cls, H, c, A_ineq=None, b_ineq=None, A_eq=None, b_eq=None, hard_ineq=None):
        H = np.atleast_2d(np.asarray(H, dtype=float))
        c = np.atleast_1d(np.asarray(c, dtype=float))
        n = c.size
        A_ineq = np.zeros((0, n)) if A_ineq is None else np.asarray(A_ineq, dtype=float).reshape(-1, n)
        A_eq = np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float).reshape(-1, n)
        b_ineq = np.zeros(0) if b_ineq is None else np.atleast_1d(np.asarray(b_ineq, dtype=float))
        b_eq = np.zeros(0) if b_eq is None else np.atleast_1d(np.asarray(b_eq, dtype=float))
        if hard_ineq is not None:
            hard_ineq = np.asarray(hard_ineq, dtype=bool)
        return cls(H, c, A_ineq, b_ineq, A_eq, b_eq, hard_ineq)

    @property
    def n(self):
        return self.c.size

    def check(self):
        n = self.n
        if self.H.shape != (n, n):
            raise DimensionMismatch(f"H is {self.H.shape}, expected {(n, n)}")
        if self.A_ineq.shape[1] != n or self.A_ineq.shape[0] != self.b_ineq.size:
            raise DimensionMismatch("A_ineq / b_ineq shapes disagree")
        if self.A_eq.shape[1] != n or self.A_eq.shape[0] != self.b_eq.size:
            raise DimensionMismatch("A_eq / b_eq shapes disagree")
        if self.hard_ineq is not None and self.hard_ineq.shape != self.b_ineq.shape:
            raise DimensionMismatch("hard_ineq must have one flag per inequality row")
        if not (np.all(np.isfinite(self.H)) and np.all(np.isfinite(self.c))
                and np.all(np.isfinite(self.A_ineq)) and np.all(np.isfinite(self.b_ineq))
                and np.all(np.isfinite(self.A_eq)) and np.all(np.isfinite(self.b_eq))):
            raise NumericalBreakdown("non-finite QP data")


@dataclass
class QpSolution:
    d: np.ndarray
    mu_ineq: np.ndarray
    mu_eq: np.ndarray
    status: QpStatus
    kkt_residual: float
    slack_ineq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    slack_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    iterations: int = 0


def kkt_residual(qp: QpData, d, mu_ineq, mu_eq) -> float:
    """max of stationarity, primal infeasibility, complementarity and dual sign violations."""
    stat = qp.H @ d + qp.c + qp.A_ineq.T @ mu_ineq + qp.A_eq.T @ mu_eq
    r_in = qp.A_ineq @ d + qp.b_ineq
    r_eq = qp.A_eq @ d + qp.b_eq
    parts = [np.max(np.abs(stat), initial=0.0),
             np.max(r_in, initial=0.0),
             np.max(np.abs(r_eq), initial=0.0),
             np.max(np.abs(mu_ineq * r_in), initial=0.0),
             np.max(-mu_ineq, initial=0.0)]
    return float(max(parts))


def _max_iter(n, n_in, n_eq):
    return 50 * (n + n_in + n_eq)


def _run_kernel(G, c, A, b, n_eq, x0, active0, max_iter):
    # unit row norms: linearized constraints can differ by ten orders of
    # magnitude, which defeats the relative rank test on the working set
    norms = np.sqrt(np.einsum("ij,ij->i", A, A))
    scale = np.where(norms > 0.0, 1.0 / np.where(norms > 0.0, norms, 1.0), 1.0)
    x, lam, status, it = kernels.active_set_qp(
        np.ascontiguousarray(G), np.ascontiguousarray(c), np.ascontiguousarray(A * scale[:, None]),
        np.ascontiguousarray(b * scale), int(n_eq), np.ascontiguousarray(x0),
        np.ascontiguousarray(active0), int(max_iter))
    lam = lam * scale
    if status == kernels.QP_BREAKDOWN:
        raise NumericalBreakdown("rank loss in the active-set working matrix")
    if status == kernels.QP_UNBOUNDED:
        raise NumericalBreakdown("QP unbounded along a zero-curvature direction")
    return x, lam, status, it


def _elastic(qp: QpData, weights_in, weights_eq, soft_in, soft_eq, G_dd):
    """Assemble the slack-augmented problem over (d, s_in, s_eq+, s_eq-).

    Only rows flagged soft get slacks. Returns kernel inputs and index maps.
    """
    n = qp.n
    idx_in = np.flatnonzero(soft_in)
    idx_eq = np.flatnonzero(soft_eq)
    k_in, k_eq = idx_in.size, idx_eq.size
    nv = n + k_in + 2 * k_eq
    G = np.zeros((nv, nv))
    G[:n, :n] = G_dd
    c = np.zeros(nv)
    c[n:n + k_in] = weights_in[idx_in]
    c[n + k_in:n + k_in + k_eq] = weights_eq[idx_eq]
    c[n + k_in + k_eq:] = weights_eq[idx_eq]

    m_in, m_eq = qp.b_ineq.size, qp.b_eq.size
    rows = m_eq + m_in + k_in + 2 * k_eq
    A = np.zeros((rows, nv))
    b = np.zeros(rows)
    A[:m_eq, :n] = qp.A_eq
    b[:m_eq] = qp.b_eq
    for k, j in enumerate(idx_eq):
        A[j, n + k_in + k] = -1.0
        A[j, n + k_in + k_eq + k] = 1.0
    r = m_eq
    A[r:r + m_in, :n] = qp.A_ineq
    b[r:r + m_in] = qp.b_ineq
    for k, i in enumerate(idx_in):
        A[r + i, n + k] = -1.0
    r += m_in
    for k in range(k_in + 2 * k_eq):
        A[r + k, n + k] = -1.0  # slack >= 0

    x0 = np.zeros(nv)
    x0[n:n + k_in] = np.maximum(qp.b_ineq[idx_in], 0.0)
    x0[n + k_in:n + k_in + k_eq] = np.maximum(qp.b_eq[idx_eq], 0.0)
    x0[n + k_in + k_eq:] = np.maximum(-qp.b_eq[idx_eq], 0.0)
    resid = A @ x0 + b
    active0 = np.zeros(rows, dtype=bool)
    active0[m_eq:] = np.abs(resid[m_eq:]) <= 1e-14
    return G, c, A, b, m_eq, x0, active0, (idx_in, idx_eq, k_in, k_eq)


def _finish(qp, d, lam_in, lam_eq, status, s_in=None, s_eq=None, iterations=0):
    res = kkt_residual(qp, d, lam_in, lam_eq)
    return QpSolution(d=d, mu_ineq=lam_in, mu_eq=lam_eq, status=status, kkt_residual=res,
                      slack_ineq=np.zeros(qp.b_ineq.size) if s_in is None else s_in,
                      slack_eq=np.zeros(qp.b_eq.size) if s_eq is None else s_eq,
                      iterations=iterations)


def _feasibility_tol(qp):
    scale = max(1.0, np.max(np.abs(qp.b_ineq), initial=0.0), np.max(np.abs(qp.b_eq), initial=0.0))
    return 1e-9 * scale


def solve_qp(qp: QpData) -> QpSolution:
    """Global minimizer and multipliers, or status Infeasible."""
    qp.check()
    n, m_in, m_eq = qp.n, qp.b_ineq.size, qp.b_eq.size
    cap = _max_iter(n, m_in, m_eq)
    tol = _feasibility_tol(qp)

    # phase 1: minimum total infeasibility from d = 0
    soft_in = qp.b_ineq > 0.0
    soft_eq = qp.b_eq != 0.0
    d0 = np.zeros(n)
    if soft_in.any() or soft_eq.any():
        ones_in, ones_eq = np.ones(m_in), np.ones(m_eq)
        G, c, A, b, ne, x0, act, (_, _, k_in, k_eq) = _elastic(
            qp, ones_in, ones_eq, soft_in, soft_eq, np.zeros((n, n)))
        x, _, status, _ = _run_kernel(G, c, A, b, ne, x0, act, 4 * cap)
        if status == kernels.QP_ITER_LIMIT:
            return _finish(qp, x[:n], np.zeros(m_in), np.zeros(m_eq), QpStatus.ITER_LIMIT)
        if np.sum(x[n:]) > tol:
            return _finish(qp, x[:n], np.zeros(m_in), np.zeros(m_eq), QpStatus.INFEASIBLE)
        d0 = x[:n]

    # phase 2
    A = np.vstack([qp.A_eq, qp.A_ineq])
    b = np.concatenate([qp.b_eq, qp.b_ineq])
    resid = qp.A_ineq @ d0 + qp.b_ineq
    # per-row scale: one huge bound row must not make slack rows look active
    row_tol = 1e-10 * (1.0 + np.abs(qp.b_ineq) + np.abs(qp.A_ineq) @ np.abs(d0))
    active0 = np.concatenate([np.zeros(m_eq, dtype=bool), resid >= -row_tol])
    H = 0.5 * (qp.H + qp.H.T)
    x, lam, status, it = _run_kernel(H, qp.c, A, b, m_eq, d0, active0, cap)
    st = QpStatus.OPTIMAL if status == kernels.QP_OPTIMAL else QpStatus.ITER_LIMIT
    return _finish(qp, x, lam[m_eq:].copy(), lam[:m_eq].copy(), st, iterations=it)


def solve_qp_elastic(qp: QpData, penalty: float) -> QpSolution:
    """Solve with a linearly penalized nonnegative slack on every soft row.

    Rows marked in ``qp.hard_ineq`` stay hard; they must hold at d = 0.
    Multipliers reported are those of the relaxed rows, bounded by penalty.
    """
    if not penalty > 0:
        raise ValueError("penalty must be positive")
    qp.check()
    n, m_in, m_eq = qp.n, qp.b_ineq.size, qp.b_eq.size
    soft_in = np.ones(m_in, dtype=bool) if qp.hard_ineq is None else ~qp.hard_ineq
    soft_eq = np.ones(m_eq, dtype=bool)
    w_in, w_eq = np.full(m_in, float(penalty)), np.full(m_eq, float(penalty))
    G, c, A, b, ne, x0, act, (idx_in, idx_eq, k_in, k_eq) = _elastic(
        qp, w_in, w_eq, soft_in, soft_eq, 0.5 * (qp.H + qp.H.T))
    c[:n] = qp.c
    cap = _max_iter(G.shape[0], A.shape[0] - ne, ne)
    x, lam, status, it = _run_kernel(G, c, A, b, ne, x0, act, cap)
    d = x[:n]
    s_in = np.zeros(m_in)
    s_in[idx_in] = x[n:n + k_in]
    s_eq = np.zeros(m_eq)
    s_eq[idx_eq] = x[n + k_in:n + k_in + k_eq] - x[n + k_in + k_eq:]
    lam_eq = lam[:m_eq].copy()
    lam_in = lam[m_eq:m_eq + m_in].copy()
    st = QpStatus.OPTIMAL if status == kernels.QP_OPTIMAL else QpStatus.ITER_LIMIT
    sol = QpSolution(d=d, mu_ineq=lam_in, mu_eq=lam_eq, status=st, kkt_residual=0.0,
                     slack_ineq=s_in, slack_eq=s_eq, iterations=it)
    relaxed = QpData(qp.H, qp.c, qp.A_ineq, qp.b_ineq - s_in, qp.A_eq, qp.b_eq - s_eq)
    sol.kkt_residual = kkt_residual(relaxed, d, lam_in, lam_eq)
    return sol

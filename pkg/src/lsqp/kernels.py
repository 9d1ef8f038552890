"""Hot numeric kernels: the dense active-set QP loop and the damped BFGS update.

Both are plain numpy written so numba can compile them unchanged. The
``*_py`` names are always the interpreted versions, ``*_jit`` the compiled
ones (None without numba); the unsuffixed names are whichever the
``LSQP_DISABLE_NUMBA`` flag selects.
"""
import numpy as np

from ._accel import HAVE_NUMBA, compile_kernel, select

if HAVE_NUMBA:
    from numba.extending import register_jitable as _inline
else:  # pragma: no cover
    def _inline(func):
        return func

QP_OPTIMAL = 0
QP_ITER_LIMIT = 1
QP_UNBOUNDED = 2
QP_BREAKDOWN = 3


@_inline
def _null_space(AW, nw, n):
    """SVD split of the working-set rows into (Z, U_r, S_r, Vt_r, rank)."""
    if nw == 0:
        return np.eye(n), np.zeros((0, 0)), np.zeros(0), np.zeros((0, n)), 0
    U, S, Vt = np.linalg.svd(AW, full_matrices=True)
    smax = S[0] if S.shape[0] > 0 else 0.0
    # the usual numerical-rank cutoff; the rows reaching here have unit norm
    tol = max(nw, n) * 2.220446049250313e-16 * max(smax, 1e-300)
    rank = 0
    for i in range(S.shape[0]):
        if S[i] > tol:
            rank += 1
    Z = np.ascontiguousarray(Vt[rank:, :].T)
    return Z, np.ascontiguousarray(U[:, :rank]), S[:rank].copy(), np.ascontiguousarray(Vt[:rank, :]), rank


@_inline
def _gather_rows(A, work, nw):
    n = A.shape[1]
    AW = np.empty((nw, n))
    for k in range(nw):
        AW[k, :] = A[work[k], :]
    return AW


@_inline
def _is_independent(A, work, nw, i):
    """True if row ``i`` is not in the span of the working-set rows."""
    a = A[i, :]
    na = np.sqrt(np.dot(a, a))
    if na == 0.0:
        return False
    if nw == 0:
        return True
    AW = _gather_rows(A, work, nw)
    Z, Ur, Sr, Vtr, rank = _null_space(AW, nw, A.shape[1])
    if Z.shape[1] == 0:
        return False
    r = Z.T @ a
    return np.sqrt(np.dot(r, r)) > 1e-9 * na


def active_set_qp_py(G, c, A, b, n_eq, x0, active0, max_iter):
    """Primal active-set method for a convex QP from a feasible start.

    minimize 0.5 x'Gx + c'x  s.t.  A[:n_eq] x + b[:n_eq] = 0,
                                   A[n_eq:] x + b[n_eq:] <= 0.

    G only needs to be positive semidefinite; zero-curvature directions in
    the null space of the working set are followed until a constraint
    blocks them. Returns (x, lam, status, iterations) where lam has one
    entry per row of A (zero for rows that ended inactive).
    """
    n = x0.shape[0]
    m = A.shape[0]
    x = x0.copy()
    work = np.zeros(max(m, 1), dtype=np.int64)
    in_w = np.zeros(max(m, 1), dtype=np.bool_)
    nw = 0
    for i in range(m):
        if i < n_eq or active0[i]:
            if nw < n and _is_independent(A, work, nw, i):
                work[nw] = i
                in_w[i] = True
                nw += 1

    lam = np.zeros(m)
    degenerate = False
    it = 0
    while it < max_iter:
        it += 1
        g = G @ x + c
        AW = _gather_rows(A, work, nw)
        Z, Ur, Sr, Vtr, rank = _null_space(AW, nw, n)
        if rank < nw:
            # near-dependent rows accumulated: keep an independent subset
            old_nw = nw
            old_work = work[:nw].copy()
            nw = 0
            for k in range(old_nw):
                i = old_work[k]
                in_w[i] = False
                work[nw] = i
                AC = _gather_rows(A, work, nw + 1)
                if _null_space(AC, nw + 1, n)[4] == nw + 1:
                    in_w[i] = True
                    nw += 1
            if nw == old_nw:
                return x, lam, QP_BREAKDOWN, it
            continue

        p = np.zeros(n)
        unbounded_dir = False
        nz = Z.shape[1]
        if nz > 0:
            Hr = Z.T @ G @ Z
            Hr = 0.5 * (Hr + Hr.T)
            gr = Z.T @ g
            w, V = np.linalg.eigh(Hr)
            wscale = 1.0
            for j in range(nz):
                if abs(w[j]) > wscale:
                    wscale = abs(w[j])
            coef = V.T @ gr
            gscale = 1.0 + np.sqrt(np.dot(g, g))
            pr = np.zeros(nz)
            for j in range(nz):
                if w[j] <= 1e-11 * wscale and abs(coef[j]) > 1e-13 * gscale:
                    unbounded_dir = True
                    pr -= coef[j] * V[:, j]
            if not unbounded_dir:
                for j in range(nz):
                    if w[j] > 1e-11 * wscale:
                        pr -= (coef[j] / w[j]) * V[:, j]
            p = Z @ pr

        xscale = 1.0
        for j in range(n):
            if abs(x[j]) > xscale:
                xscale = abs(x[j])
        pnorm = 0.0
        for j in range(n):
            if abs(p[j]) > pnorm:
                pnorm = abs(p[j])

        if pnorm <= 1e-13 * xscale and not unbounded_dir:
            # stationary on the working set: check multiplier signs
            lw = np.zeros(nw)
            if nw > 0:
                lw = -(Ur @ ((Vtr @ g) / Sr))
            gscale = 1.0 + np.sqrt(np.dot(g, g))
            drop = -1
            worst = -1e-11 * gscale
            for k in range(nw):
                idx = work[k]
                if idx < n_eq:
                    continue
                if degenerate:
                    # lowest-index rule after a zero-length step
                    if lw[k] < -1e-11 * gscale and (drop < 0 or idx < work[drop]):
                        drop = k
                elif lw[k] < worst or (lw[k] == worst and drop >= 0 and idx < work[drop]):
                    worst = lw[k]
                    drop = k
            if drop < 0:
                lam[:] = 0.0
                for k in range(nw):
                    lam[work[k]] = lw[k]
                return x, lam, QP_OPTIMAL, it
            in_w[work[drop]] = False
            for k in range(drop, nw - 1):
                work[k] = work[k + 1]
            nw -= 1
            continue

        # ratio test; a blocker numerically in the span of the working set
        # cannot really block and would make the working set singular
        skip = np.zeros(m, dtype=np.bool_)
        while True:
            alpha = np.inf if unbounded_dir else 1.0
            block = -1
            for i in range(n_eq, m):
                if in_w[i] or skip[i]:
                    continue
                ap = np.dot(A[i, :], p)
                if ap > 1e-14 * (1.0 + np.sqrt(np.dot(A[i, :], A[i, :]))) * pnorm:
                    r = -(np.dot(A[i, :], x) + b[i]) / ap
                    if r * pnorm <= 1e-13 * xscale:
                        r = 0.0  # ties at zero go to the lowest index
                    if r < alpha:
                        alpha = r
                        block = i
            if block < 0 or nw == 0:
                break
            work[nw] = block
            if _null_space(_gather_rows(A, work, nw + 1), nw + 1, n)[4] == nw + 1:
                break
            skip[block] = True
        if block < 0 and unbounded_dir:
            return x, lam, QP_UNBOUNDED, it
        x = x + alpha * p
        degenerate = alpha * pnorm <= 1e-13 * xscale
        if block >= 0:
            work[nw] = block
            in_w[block] = True
            nw += 1
    return x, lam, QP_ITER_LIMIT, it


def damped_bfgs_py(B, s, y):
    """Powell-damped BFGS update. Returns (B_new, theta, skipped).

    Skipped (B unchanged) when s'Bs is negligible or the result would be
    numerically indefinite (after diagonal scaling, condition beyond 1e12).
    """
    Bs = B @ s
    sBs = np.dot(s, Bs)
    if sBs <= 1e-14:
        return B.copy(), 1.0, True
    sy = np.dot(s, y)
    if sy >= 0.2 * sBs:
        theta = 1.0
    else:
        theta = 0.8 * sBs / (sBs - sy)
    r = theta * y + (1.0 - theta) * Bs
    sr = np.dot(s, r)
    Bn = B - np.outer(Bs, Bs) / sBs + np.outer(r, r) / sr
    Bn = 0.5 * (Bn + Bn.T)
    # exact arithmetic keeps Bn PD, but repeated damping can shrink the
    # smallest eigenvalue into roundoff; refuse updates that get there.
    # The test is on the unit-diagonal scaling so badly scaled variables
    # alone do not trigger it.
    dg = np.diag(Bn).copy()
    if not (np.all(np.isfinite(dg)) and np.min(dg) > 0.0):
        return B.copy(), theta, True
    dg = 1.0 / np.sqrt(dg)
    w = np.linalg.eigvalsh(Bn * np.outer(dg, dg))
    if not w[0] > 1e-12 * w[-1]:
        return B.copy(), theta, True
    return Bn, theta, False


active_set_qp_jit = compile_kernel(active_set_qp_py)
damped_bfgs_jit = compile_kernel(damped_bfgs_py)

active_set_qp = select(active_set_qp_py, active_set_qp_jit)
damped_bfgs = select(damped_bfgs_py, damped_bfgs_jit)

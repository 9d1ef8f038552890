"""Time the numba kernels against their pure-numpy twins.

    python benchmarks/bench_kernels.py [--reps 200] [--sizes 8,18,30]

Both versions are called directly (no env flag needed) on the same random
inputs, and their outputs are compared before timing.
"""
import argparse
import time

import numpy as np

from lsqp import kernels


def random_qp(n, m, rng):
    M = rng.standard_normal((n, n))
    G = M @ M.T + n * np.eye(n)
    c = rng.standard_normal(n)
    A = rng.standard_normal((m, n))
    b = -rng.uniform(0.1, 1.0, m)  # x = 0 strictly feasible
    return G, c, A, b, 0, np.zeros(n), np.zeros(m, dtype=np.bool_), 50 * (n + m)


def random_bfgs(n, rng):
    M = rng.standard_normal((n, n))
    return M @ M.T + np.eye(n), rng.standard_normal(n), rng.standard_normal(n)


def best_of(fn, args, reps):
    fn(*args)  # warm up (compiles on first call)
    best = np.inf
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(reps):
            fn(*args)
        best = min(best, (time.perf_counter() - t0) / reps)
    return best


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=200)
    ap.add_argument("--sizes", default="8,18,30")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if kernels.active_set_qp_jit is None:
        raise SystemExit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(args.seed)

    print(f"{'kernel':<10} {'n':>4} {'numpy us':>10} {'numba us':>10} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        qp = random_qp(n, 2 * n, rng)
        x_py = kernels.active_set_qp_py(*qp)[0]
        x_jit = kernels.active_set_qp_jit(*qp)[0]
        assert np.allclose(x_py, x_jit, atol=1e-10), "QP kernels disagree"
        t_py = best_of(kernels.active_set_qp_py, qp, args.reps)
        t_jit = best_of(kernels.active_set_qp_jit, qp, args.reps)
        print(f"{'qp':<10} {n:>4} {1e6 * t_py:>10.1f} {1e6 * t_jit:>10.1f} {t_py / t_jit:>7.1f}x")

        up = random_bfgs(n, rng)
        assert np.allclose(kernels.damped_bfgs_py(*up)[0], kernels.damped_bfgs_jit(*up)[0])
        t_py = best_of(kernels.damped_bfgs_py, up, 20 * args.reps)
        t_jit = best_of(kernels.damped_bfgs_jit, up, 20 * args.reps)
        print(f"{'bfgs':<10} {n:>4} {1e6 * t_py:>10.1f} {1e6 * t_jit:>10.1f} {t_py / t_jit:>7.1f}x")


if __name__ == "__main__":
    main()

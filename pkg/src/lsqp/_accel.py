"""Optional numba acceleration.

Kernels are written in the numpy subset numba understands. Setting
``LSQP_DISABLE_NUMBA=1`` (or running without numba installed) keeps the
pure-numpy versions.
"""
import os

try:
    import numba
except ImportError:  # pragma: no cover - numba is a soft dependency
    numba = None

ENV_FLAG = "LSQP_DISABLE_NUMBA"

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and os.environ.get(ENV_FLAG, "0").strip().lower() not in ("1", "true", "yes", "on")


def compile_kernel(func):
    """Return an njit-compiled copy of ``func``, or None without numba."""
    if not HAVE_NUMBA:
        return None
    return numba.njit(cache=True)(func)


def select(py_func, jit_func):
    return jit_func if (USE_NUMBA and jit_func is not None) else py_func

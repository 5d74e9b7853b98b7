"""JIT switch for the numeric kernels.

Set ``PNORMFLOW_DISABLE_NUMBA=1`` to run the kernels as plain Python over
numpy arrays. The same switch is taken when numba cannot be imported.
"""
import os

_FLAG = "PNORMFLOW_DISABLE_NUMBA"

USE_NUMBA = os.environ.get(_FLAG, "").strip().lower() not in {"1", "true", "yes", "on"}

if USE_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise an identity decorator.

    The undecorated function stays reachable as ``.py_func`` either way so
    tests and benchmarks can compare both paths in one process.
    """
    if USE_NUMBA:
        return _njit(*args, **kwargs)

    def wrap(fn):
        fn.py_func = fn
        return fn

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return wrap(args[0])
    return wrap

"""Numba switch.

Set ``HYL_DISABLE_NUMBA=1`` before import to run every kernel through its
pure-python/numpy fallback. The flag is read once, at import time.
"""

import os

_FLAG = os.environ.get("HYL_DISABLE_NUMBA", "").strip().lower()

try:  # pragma: no cover - depends on environment
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

USE_NUMBA = _numba is not None and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity otherwise."""
    if USE_NUMBA:
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(func):
        return func

    return wrap


def compile_kernel(func, **kwargs):
    """Compile ``func`` with numba regardless of the flag (for benchmarks)."""
    if _numba is None:
        raise ImportError("numba is not installed")
    return _numba.njit(**kwargs)(func)

"""Numba shim.

Hot kernels are written once as plain Python over numpy arrays and compiled
with ``njit`` when numba is importable and not disabled.  Set
``HOSDETECT_BACKEND=numpy`` to force the pure-numpy path (useful for
debugging and for the benchmark comparison).
"""
import os
import warnings

_requested = os.environ.get("HOSDETECT_BACKEND", "numba").strip().lower()

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None
    if _requested == "numba":
        warnings.warn("numba is not installed - falling back to the numpy backend")

USE_NUMBA = _numba is not None and _requested != "numpy"
BACKEND = "numba" if USE_NUMBA else "numpy"


def njit(func):
    """Compile ``func`` in nopython mode, or return it unchanged on the numpy backend.

    The original Python function stays reachable as ``.py_func`` either way so
    both paths can be exercised from the same process.
    """
    if not USE_NUMBA:
        func.py_func = func
        return func
    return _numba.njit(cache=True)(func)

"""Numba switch.

Set ``NURBSCT_NUMBA=0`` before import to run every kernel through its
pure-numpy implementation instead of the compiled one.
"""
import os

_flag = os.environ.get("NURBSCT_NUMBA", "1").strip().lower()
USE_NUMBA = _flag not in ("0", "false", "no", "off")

try:
    import numba
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    HAVE_NUMBA = False
    USE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


def select(compiled, fallback):
    """Return the compiled kernel when numba is enabled, else the fallback."""
    return compiled if USE_NUMBA else fallback


def backend():
    return "numba" if USE_NUMBA else "numpy"

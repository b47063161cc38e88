"""Optional numba acceleration.

Set ``MEANS_LAB_NUMBA=0`` before import to force the pure-numpy kernels.
"""
import os

USE_NUMBA = os.environ.get("MEANS_LAB_NUMBA", "1").strip().lower() not in ("0", "false", "no", "off")

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None
    USE_NUMBA = False


def njit(func):
    """``numba.njit(cache=True)`` when available, otherwise identity."""
    if numba is None:
        return func
    return numba.njit(cache=True)(func)

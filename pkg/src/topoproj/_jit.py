"""Numba switch.

Hot per-pixel kernels exist twice: a numba ``@njit`` loop version and a
vectorized numpy version.  ``USE_NUMBA`` picks which one the public API
dispatches to.  Set ``TOPOPROJ_DISABLE_NUMBA=1`` before import to force the
numpy path (numba missing has the same effect).
"""
import os

try:
    import numba

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    numba = None
    HAS_NUMBA = False

ENABLE_NUMBA = os.environ.get("TOPOPROJ_DISABLE_NUMBA", "0").lower() not in ("1", "true", "yes")
CACHE_NUMBA = os.environ.get("TOPOPROJ_NUMBA_CACHE", "1").lower() not in ("0", "false", "no")

USE_NUMBA = HAS_NUMBA and ENABLE_NUMBA


def njit(func):
    """Compile ``func`` in nopython mode when numba is installed; otherwise return it unchanged.

    Compilation happens regardless of ``USE_NUMBA`` so the benchmark and
    the equivalence tests can always reach both paths.
    """
    if HAS_NUMBA:
        return numba.njit(cache=CACHE_NUMBA, fastmath=False)(func)
    return func

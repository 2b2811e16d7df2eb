"""Numerical backend selection.

Hot kernels in :mod:`ammsim.kernels` are compiled with numba when available.
Setting the environment variable ``AMM_PURE_NUMPY=1`` (read once at import)
forces the pure-numpy interpretation of the same source, which is useful for
debugging and as a reference path for the backend benchmark.
"""

import os

try:
    from numba import njit as _njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    _njit = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("AMM_PURE_NUMPY", "0") != "1"

BACKEND = "numba" if USE_NUMBA else "numpy"


def jit(fn):
    """Compile ``fn`` with numba on the numba backend; identity otherwise.

    Compiled dispatchers keep the original function on ``.py_func``, which the
    backend benchmark uses to time both paths in one process.
    """
    if USE_NUMBA:
        return _njit(cache=True)(fn)
    return fn

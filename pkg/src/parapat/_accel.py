"""Numba switch.

Hot kernels are written once as plain Python loops and compiled with
``numba.njit`` unless ``PARAPAT_DISABLE_NUMBA`` is set to a truthy value
(or numba is missing), in which case callers get the vectorised numpy
implementations instead.
"""
import os

_FLAG = os.environ.get("PARAPAT_DISABLE_NUMBA", "").strip().lower()

try:
    from numba import njit as _njit
    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def _njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func
        return decorator

USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")

njit = _njit

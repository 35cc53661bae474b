"""Backend selection for the compiled kernels.

Set ``FRACKORN_DISABLE_NUMBA=1`` to force the pure-numpy code path.
"""
import os

_FLAG = os.environ.get("FRACKORN_DISABLE_NUMBA", "0").strip().lower()

try:
    import numba
    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    numba = None
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and _FLAG not in ("1", "true", "yes", "on")


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or a no-op decorator without numba."""
    kwargs.setdefault("cache", True)
    if not HAS_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"

"""JIT switch for the hot kernels.

Kernels are written once, in the subset of Python/numpy that numba
compiles. With ``OTSUB_DISABLE_NUMBA=1`` in the environment (or numba
missing) the same functions run as plain Python over numpy arrays, which
is the reference path used by the kernel benchmark.
"""

import os

_DISABLED = os.environ.get("OTSUB_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    import numba

    NUMBA_ENABLED = True
except ImportError:
    numba = None
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        kwargs.setdefault("nogil", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def deco(func):
        return func

    return deco


__all__ = ["njit", "NUMBA_ENABLED"]

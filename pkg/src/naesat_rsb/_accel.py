"""Optional numba acceleration.

Hot loops are written once in a numba-friendly subset of Python. When numba
is importable and ``NAESAT_RSB_NO_NUMBA`` is unset (or "0"), they are compiled
with ``numba.njit``; otherwise callers dispatch to vectorized numpy versions.
"""
import os

_flag = os.environ.get("NAESAT_RSB_NO_NUMBA", "0").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError
    import numba  # noqa: F401
    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when acceleration is on, identity decorator otherwise."""
    if HAVE_NUMBA:
        import numba
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f


def use_numba():
    return HAVE_NUMBA

"""Numba switch.

Hot kernels in :mod:`flbo.kernels` exist twice: a vectorised numpy version and
a compiled loop version. ``FLBO_NUMBA=0`` in the environment forces the numpy
path; the compiled path is also skipped when numba cannot be imported.
"""

import os

try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False


def _flag_enabled():
    value = os.environ.get("FLBO_NUMBA", "1").strip().lower()
    return value not in ("0", "false", "off", "no")


USE_NUMBA = _HAVE_NUMBA and _flag_enabled()


def njit(*args, **kwargs):
    """``numba.njit`` when numba is importable, identity otherwise."""
    kwargs.setdefault("cache", True)
    if not _HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]):
            return args[0]
        return lambda fn: fn
    return numba.njit(*args, **kwargs)

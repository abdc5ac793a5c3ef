"""Numba switch.

Set ``COSTAL_DISABLE_NUMBA=1`` to force the pure-numpy kernels. When numba is
missing the numpy path is used silently.
"""
import os

_DISABLED = os.environ.get("COSTAL_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False
    _njit = None

USE_NUMBA = HAVE_NUMBA and not _DISABLED


def njit(fn):
    """Compile ``fn`` in nopython mode with on-disk caching, or return it as is."""
    if not HAVE_NUMBA:
        return fn
    return _njit(cache=True, nogil=True)(fn)

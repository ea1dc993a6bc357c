"""Numba switch for the hot kernels.

Set ``AMTGRAPH_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The
numpy paths are also used when numba is not importable.
"""
import os

DISABLED_BY_ENV = os.environ.get("AMTGRAPH_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba as _numba
except ImportError:  # pragma: no cover
    _numba = None

NUMBA_AVAILABLE = _numba is not None
USE_NUMBA = NUMBA_AVAILABLE and not DISABLED_BY_ENV


def njit(fn):
    """Compile ``fn`` with numba (nogil, cached) when available.

    Compilation happens even when the env flag disables numba, so the
    benchmark can still compare both paths; the flag only changes which
    path the library dispatches to.
    """
    if not NUMBA_AVAILABLE:  # pragma: no cover
        return None
    return _numba.njit(cache=True, nogil=True)(fn)

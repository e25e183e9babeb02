"""Backend selection for the hot kernels.

Set ``SQUEEZEDJC_DISABLE_NUMBA=1`` before import to force the pure-numpy
implementations. Both paths are always importable so tests and the benchmark
can compare them directly.
"""

from __future__ import annotations

import os

_FLAG = os.environ.get("SQUEEZEDJC_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in ("1", "true", "yes", "on")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    _numba = None

NUMBA_AVAILABLE = _numba is not None
NUMBA_ENABLED = NUMBA_AVAILABLE and not _DISABLED


def njit(func):
    """``numba.njit(cache=True)`` when numba is importable, identity otherwise."""
    if not NUMBA_AVAILABLE:
        return func
    return _numba.njit(cache=True)(func)


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"

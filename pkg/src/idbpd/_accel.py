"""Backend switch for the compiled kernels.

The numba path is used when numba imports cleanly and ``IDBPD_NUMBA`` is not
set to a false-like value (``0``, ``false``, ``no``, ``off``). The flag is read
once at import time.
"""

from __future__ import annotations

import os

_FALSE = {"0", "false", "no", "off"}


def _requested() -> bool:
    return os.environ.get("IDBPD_NUMBA", "1").strip().lower() not in _FALSE


try:
    import numba as _numba
except ImportError:  # pragma: no cover - exercised only without numba
    _numba = None

HAVE_NUMBA = _numba is not None
USE_NUMBA = HAVE_NUMBA and _requested()
BACKEND = "numba" if USE_NUMBA else "numpy"


def compile_kernel(fn):
    """Return an ``njit``-compiled copy of ``fn``, or ``None`` without numba."""
    if not HAVE_NUMBA:
        return None
    return _numba.njit(cache=True, nogil=True)(fn)

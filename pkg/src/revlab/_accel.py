"""Backend selection for the hot kernels.

The geodesic-flow kernels exist twice: a scalar version compiled with numba
and a lane-vectorized pure-numpy version.  ``REVLAB_BACKEND`` picks one at
call time (``numba`` or ``numpy``); numba is the default when importable.
"""

from __future__ import annotations

import os

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

ENV_FLAG = "REVLAB_BACKEND"


def backend() -> str:
    """Return the active backend name, ``"numba"`` or ``"numpy"``."""
    choice = os.environ.get(ENV_FLAG, "numba").strip().lower()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"{ENV_FLAG} must be 'numba' or 'numpy', got {choice!r}")
    if choice == "numba" and not HAVE_NUMBA:
        return "numpy"
    return choice


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if HAVE_NUMBA:
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f

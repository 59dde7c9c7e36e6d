"""Numba/NumPy backend selection for the hot kernels.

Set ``ROBUSTAMP_NO_NUMBA=1`` in the environment to force the pure-NumPy
fallback path (also used automatically when numba is not importable).
Selection happens once at import; ``benchmarks/bench_kernels.py`` compares
both paths directly.
"""

import os

_env = os.environ.get("ROBUSTAMP_NO_NUMBA", "").strip().lower()
_disabled = _env in ("1", "true", "yes", "on")

if not _disabled:
    try:
        from numba import njit

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - depends on environment
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

if not HAVE_NUMBA:

    def njit(*args, **kwargs):
        """Identity decorator standing in for numba.njit."""

        if args and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


def using_numba():
    """True when the jitted kernel path is active."""
    return HAVE_NUMBA

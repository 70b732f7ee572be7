"""Runtime switches read from the environment.

``KSIPM_DISABLE_NUMBA=1`` forces the pure-numpy kernel path even when numba is
importable. ``KSIPM_THREADS`` caps the worker count handed to ``scipy.fft`` and
to numba.
"""

import os

try:
    import numba as nb

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False


def _flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in ("1", "true", "yes", "on")


USE_NUMBA = _HAVE_NUMBA and not _flag("KSIPM_DISABLE_NUMBA")


def _threads():
    raw = os.environ.get("KSIPM_THREADS", "").strip()
    if not raw:
        return None
    n = int(raw)
    if n < 1:
        raise ValueError(f"KSIPM_THREADS must be >= 1, got {raw!r}")
    return n


THREADS = _threads()
FFT_WORKERS = THREADS if THREADS is not None else 1

if USE_NUMBA and THREADS is not None:
    nb.set_num_threads(min(THREADS, nb.config.NUMBA_NUM_THREADS))


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if _HAVE_NUMBA:
        return nb.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda func: func

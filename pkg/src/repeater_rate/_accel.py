"""Backend selection for the numeric kernels.

Set ``REPEATER_RATE_BACKEND=numpy`` to force the pure-numpy path, or
``numba`` to require the JIT path. The default uses numba when importable.
"""
import os

BACKEND_ENV = "REPEATER_RATE_BACKEND"


def _noop_jit(*args, **kwargs):
    """Stand-in for ``numba.njit`` that returns the function unchanged."""
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def wrap(f):
        return f

    return wrap


def _have_numba():
    try:
        import numba  # noqa: F401

        return True
    except ImportError:
        return False


HAVE_NUMBA = _have_numba()

_requested = os.environ.get(BACKEND_ENV, "auto").strip().lower()
if _requested not in ("auto", "numba", "numpy"):
    raise ImportError(f"{BACKEND_ENV} must be 'auto', 'numba' or 'numpy', got {_requested!r}")
if _requested == "numba" and not HAVE_NUMBA:
    raise ImportError(f"{BACKEND_ENV}=numba but numba is not installed")

USE_NUMBA = HAVE_NUMBA and _requested != "numpy"

if HAVE_NUMBA:
    from numba import njit
else:
    njit = _noop_jit

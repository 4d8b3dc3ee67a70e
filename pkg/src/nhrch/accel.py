"""Acceleration switch for the hot numeric kernels.

Kernels are written once, as plain numpy code, and compiled with numba's
``njit`` when acceleration is enabled.  Set ``NHRCH_NUMBA=0`` in the
environment (or run without numba installed) to execute the identical
source as ordinary Python.  Results agree between the two modes; only
speed differs.
"""

import os


def _env_enabled() -> bool:
    flag = os.environ.get("NHRCH_NUMBA", "1").strip().lower()
    return flag not in ("0", "false", "no", "off")


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

NUMBA_ENABLED = HAVE_NUMBA and _env_enabled()


def jit_compiler(use_numba: bool):
    """Return the decorator applied to kernel closures.

    ``fastmath`` stays off: reassociation would break the bitwise
    reproducibility that the golden-file tests rely on.
    """
    if use_numba:
        return lambda f: numba.njit(f, cache=False, fastmath=False)
    return lambda f: f


def maybe_njit(f):
    """Compile a module-level kernel when acceleration is on."""
    if NUMBA_ENABLED:
        return numba.njit(f, cache=False, fastmath=False)
    return f


def is_compiled(fn) -> bool:
    return HAVE_NUMBA and isinstance(fn, numba.core.dispatcher.Dispatcher)


def all_compiled(*fns) -> bool:
    """True when every non-None callable is a numba dispatcher."""
    return all(is_compiled(f) for f in fns if f is not None)

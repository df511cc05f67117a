"""Kernel backend selection.

The hot numeric kernels in :mod:`geosyn._kernels` are compiled with numba's
``@njit`` when the numba backend is active.  Setting the environment variable
``GEOSYN_NUMBA=0`` (before import) selects the pure-numpy fallback: the same
function bodies run undecorated as plain Python.  The fallback is typically
two to three orders of magnitude slower but needs no compilation and no numba
installation; results agree with the compiled path to floating-point rounding.
"""

import os

NUMBA_ENV = "GEOSYN_NUMBA"


def _numba_requested() -> bool:
    value = os.environ.get(NUMBA_ENV, "1").strip().lower()
    return value not in ("0", "false", "off", "no")


USING_NUMBA = False
if _numba_requested():
    # pin the threading layer before numba probes TBB (avoids a version
    # warning on systems with an old TBB); omp falls back gracefully
    os.environ.setdefault("NUMBA_THREADING_LAYER", "omp")
    try:
        import numba as _numba

        USING_NUMBA = True
    except ImportError:
        USING_NUMBA = False


if USING_NUMBA:
    prange = _numba.prange

    def njit(func=None, **kwargs):
        kwargs.setdefault("cache", True)
        if func is None:
            return lambda f: _numba.njit(**kwargs)(f)
        return _numba.njit(**kwargs)(func)

else:
    prange = range

    def njit(func=None, **kwargs):  # noqa: ARG001 - mirror the numba signature
        if func is None:
            return lambda f: f
        return func


def backend_name() -> str:
    return "numba" if USING_NUMBA else "numpy"

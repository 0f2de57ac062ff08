"""Backend selection: numba-jitted kernels or the same code run as plain python.

The environment variable RWRE_BACKEND picks the implementation:

* ``auto`` (default) -- use numba when importable, else plain python;
* ``numba``          -- require numba, fail loudly if missing;
* ``python``         -- force the plain-python path even if numba is present.

Kernels are written once and decorated with :func:`jit`, which is either
``numba.njit(cache=True)`` or the identity.  Random-number primitives differ
between the two paths (uint64 wraparound vs masked python ints), so kernels
import them from here and treat generator state as an opaque value.
"""

import os

_choice = os.environ.get("RWRE_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "numba", "python"):
    raise ValueError(
        f"RWRE_BACKEND must be one of auto|numba|python, got {_choice!r}"
    )

USE_NUMBA = False
if _choice in ("auto", "numba"):
    try:
        import numba

        USE_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise
        USE_NUMBA = False


if USE_NUMBA:
    def jit(func):
        return numba.njit(cache=True)(func)

    from ._rng_nb import mix64, next_u01, site_u01, stream_for  # noqa: F401

    import numpy as _np

    def as_state(x):
        """Coerce a python-int seed/state to what the kernels expect."""
        return _np.uint64(int(x) & 0xFFFFFFFFFFFFFFFF)

else:
    def jit(func):
        return func

    from ._rng_py import mix64, next_u01, site_u01, stream_for  # noqa: F401

    def as_state(x):
        return int(x) & 0xFFFFFFFFFFFFFFFF


BACKEND = "numba" if USE_NUMBA else "python"

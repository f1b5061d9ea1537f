"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

The backend is chosen once at import time from the environment variable
``VIBGMM_BACKEND``:

* ``auto`` (default) - numba if it imports, numpy otherwise
* ``numba``          - require numba, fail loudly if unavailable
* ``numpy``          - force the pure-numpy path

Both implementations are importable directly (``kernels._numpy``,
``kernels._numba``) so tests and the benchmark can compare them.
"""

import os

from . import _numpy

_CHOICE = os.environ.get("VIBGMM_BACKEND", "auto").lower()

if _CHOICE not in ("auto", "numba", "numpy"):
    raise ValueError(
        f"VIBGMM_BACKEND={_CHOICE!r} not recognized (use auto, numba, or numpy)"
    )

if _CHOICE == "numpy":
    _impl = _numpy
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _CHOICE == "numba":
            raise
        _impl = _numpy
        BACKEND = "numpy"

kl_diag_matrix = _impl.kl_diag_matrix
kl_diag_matrix_grads = _impl.kl_diag_matrix_grads
log_gauss_diag_matrix = _impl.log_gauss_diag_matrix
nearest_centroid = _impl.nearest_centroid


def warmup():
    """Compile the numba kernels ahead of timed sections; no-op on numpy."""
    if BACKEND == "numba":
        _impl.warmup()

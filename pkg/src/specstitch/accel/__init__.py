"""Backend selection for the hot kernels.

The env var STITCH_BACKEND picks the implementation at import time:
"numba" (default) or "numpy". If numba is not importable the numpy path is
used regardless. ``get_backend`` gives explicit access to either one, which
the parity tests and the kernel benchmark use to compare both.
"""

import os

from . import numpy_kernels


def _load_numba_kernels():
    from . import numba_kernels

    return numba_kernels


def get_backend(name):
    if name == "numpy":
        return numpy_kernels
    if name == "numba":
        return _load_numba_kernels()
    raise ValueError(f"unknown backend {name!r} (expected 'numba' or 'numpy')")


_requested = os.environ.get("STITCH_BACKEND", "numba").strip().lower()
if _requested not in ("numba", "numpy"):
    raise ValueError(f"STITCH_BACKEND={_requested!r} not understood (use 'numba' or 'numpy')")

if _requested == "numba":
    try:
        _active = _load_numba_kernels()
        BACKEND = "numba"
    except ImportError:
        _active = numpy_kernels
        BACKEND = "numpy"
else:
    _active = numpy_kernels
    BACKEND = "numpy"

fft_radix2 = _active.fft_radix2
conv1d_fwd = _active.conv1d_fwd
conv1d_bwd_input = _active.conv1d_bwd_input
conv1d_bwd_params = _active.conv1d_bwd_params

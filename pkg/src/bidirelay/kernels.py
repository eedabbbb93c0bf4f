"""Kernel backend selection.

The compiled extension is used when it imports; otherwise, or when
``BIDIRELAY_PURE_PYTHON`` is set to a non-empty value, the numpy fallback
is used. ``BACKEND`` names the active one.
"""

import os

from . import _kernels_py

if os.environ.get("BIDIRELAY_PURE_PYTHON"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

jacobi_eigh = _impl.jacobi_eigh
pair_rates = _impl.pair_rates
fixed_point_power = _impl.fixed_point_power


def available_backends():
    """Return ``{name: module}`` for every importable kernel backend."""
    found = {"python": _kernels_py}
    try:
        from . import _kernels

        found["cython"] = _kernels
    except ImportError:
        pass
    return found

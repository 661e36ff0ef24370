"""Select the compiled sweep kernels when available.

Set ``DPGLS_PURE_PYTHON=1`` to force the pure-Python fallback.
"""

import os

from . import _sweep_py

if os.environ.get("DPGLS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _sweep_py
    BACKEND = "python"
else:
    try:
        from . import _sweep as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _sweep_py
        BACKEND = "python"

sweep_scalar = _impl.sweep_scalar
sweep_matrix = _impl.sweep_matrix

__all__ = ["BACKEND", "sweep_scalar", "sweep_matrix"]

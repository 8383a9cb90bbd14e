"""Selects the compiled jet kernels when available.

Set ``FINSLERLAB_PURE=1`` to force the numpy fallback.
"""

import os

from . import _jetcore_py as python_kernels

try:
    if os.environ.get("FINSLERLAB_PURE", "") not in ("", "0"):
        raise ImportError("pure backend requested")
    from . import _jetcore as compiled_kernels
except ImportError:
    compiled_kernels = None

_active = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if compiled_kernels is not None else "python"

mul = _active.mul
horner = _active.horner

"""Kernel backend selection.

The compiled Cython kernels are used when importable; otherwise the pure-Python
twins. Setting ``EWENS_PITMAN_PURE=1`` forces the fallback.
"""
import os

from . import _pykernels

if os.environ.get("EWENS_PITMAN_PURE"):
    kernels = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as kernels
        BACKEND = "cython"
    except ImportError:
        kernels = _pykernels
        BACKEND = "python"

__all__ = ["kernels", "BACKEND"]

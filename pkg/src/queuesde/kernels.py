"""Backend selection for the sequential integration kernels.

The compiled extension is used when importable; otherwise the pure-Python
implementation is loaded. Setting ``QUEUESDE_PURE_PYTHON=1`` forces the
fallback. Both backends return bitwise-identical results.
"""
import os

from . import _kernels_py

if os.environ.get("QUEUESDE_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

euler_vol = _impl.euler_vol
euler_queue = _impl.euler_queue
hosking_fgn = _impl.hosking_fgn

__all__ = ["BACKEND", "euler_vol", "euler_queue", "hosking_fgn"]

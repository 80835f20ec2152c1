"""Kernel dispatch: compiled extension when available, numpy otherwise.

Set ``SYMTEST_PURE_PYTHON=1`` to force the numpy fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("SYMTEST_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

apply_power = _impl.apply_power
apply_power_batch = _impl.apply_power_batch
expectations = _impl.expectations
tensor_power_batch = _impl.tensor_power_batch

__all__ = [
    "BACKEND",
    "apply_power",
    "apply_power_batch",
    "expectations",
    "tensor_power_batch",
]

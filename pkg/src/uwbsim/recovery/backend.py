"""Kernel backend selection.

The shared-support BCS engine exists twice: a Cython extension
(uwbsim.recovery._fastbcs) and a NumPy twin (_fastbcs_py).  The compiled
one is preferred when importable; UWBSIM_BACKEND=python or
UWBSIM_BACKEND=compiled forces the choice (the latter raises if the
extension is missing rather than silently degrading).
"""

from __future__ import annotations

import os

from . import _fastbcs_py

__all__ = ["get_kernel", "kernel_name", "available_kernels"]

_FORCED = os.environ.get("UWBSIM_BACKEND", "").strip().lower()

try:
    from . import _fastbcs  # type: ignore[attr-defined]
except ImportError:
    _fastbcs = None

if _FORCED == "python":
    _KERNEL = _fastbcs_py
elif _FORCED == "compiled":
    if _fastbcs is None:
        raise ImportError(
            "UWBSIM_BACKEND=compiled but the _fastbcs extension is not built"
        )
    _KERNEL = _fastbcs
elif _FORCED:
    raise ImportError(f"UWBSIM_BACKEND must be 'python' or 'compiled', got {_FORCED!r}")
else:
    _KERNEL = _fastbcs if _fastbcs is not None else _fastbcs_py


def get_kernel():
    """Module implementing solve_shared (compiled if available)."""
    return _KERNEL


def kernel_name() -> str:
    return _KERNEL.KERNEL_NAME


def available_kernels() -> dict:
    """Name -> module for every importable kernel (benchmarks iterate this)."""
    out = {"python": _fastbcs_py}
    if _fastbcs is not None:
        out["compiled"] = _fastbcs
    return out

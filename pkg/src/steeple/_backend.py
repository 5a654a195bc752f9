"""Selects the evaluator kernel: compiled when available, else pure Python.

Set ``STEEPLE_PURE_PYTHON=1`` to force the pure-Python kernel.
"""

import os

from . import _pyeval

python_kernel = _pyeval

try:
    from . import _ceval as compiled_kernel
except ImportError:
    compiled_kernel = None

if compiled_kernel is not None and os.environ.get("STEEPLE_PURE_PYTHON", "") in ("", "0"):
    kernel = compiled_kernel
else:
    kernel = python_kernel

NAME = kernel.NAME


def available() -> dict:
    """Kernels that can be used in this process, by name."""
    out = {"python": python_kernel}
    if compiled_kernel is not None:
        out["compiled"] = compiled_kernel
    return out

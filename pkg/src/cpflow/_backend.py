"""Pick the kernel backend once, at import.

The compiled core is preferred; setting ``CPFLOW_PURE_PYTHON=1`` forces the
pure-Python twin (used by the benchmark and the backend-agreement tests).
"""
from __future__ import annotations

import os

from . import _kernels_py

if os.environ.get("CPFLOW_PURE_PYTHON", "") not in ("", "0"):
    kernels = _kernels_py
    COMPILED = False
else:
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]

        COMPILED = True
    except ImportError:  # extension not built
        kernels = _kernels_py
        COMPILED = False

BACKEND_NAME = "cython" if COMPILED else "python"

"""Kernel backend selection.

The compiled extension is used when it imported cleanly; otherwise the numpy
fallback is used.  ``VRUTWIN_BACKEND=python`` forces the fallback, which is
handy for benchmarking and for cross-checking the two implementations.
"""

from __future__ import annotations

import os
from types import ModuleType

from . import _kernels_py


def _load() -> tuple[ModuleType, str]:
    if os.environ.get("VRUTWIN_BACKEND", "").lower() == "python":
        return _kernels_py, "python"
    try:
        from . import _ext
    except ImportError:
        return _kernels_py, "python"
    return _ext, "cython"


kernels, BACKEND = _load()


def available_backends() -> dict[str, ModuleType]:
    found = {"python": _kernels_py}
    try:
        from . import _ext

        found["cython"] = _ext
    except ImportError:
        pass
    return found

"""Selects the depth-kernel implementation at import time.

The compiled extension is preferred when present; ``TPIK_PURE_PYTHON=1``
forces the NumPy fallback.  Both expose the same module-level API
(render, removal_mask, min_search) with bit-identical results.
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced_py = os.environ.get("TPIK_PURE_PYTHON", "") not in ("", "0")

if _forced_py:
    _active = _kernels_py
else:
    try:
        from . import _kernels as _compiled
        _active = _compiled
    except ImportError:
        _active = _kernels_py


def active_backend() -> str:
    return "compiled" if _active.COMPILED else "python"


def available_backends() -> list:
    names = ["python"]
    try:
        from . import _kernels  # noqa: F401
        names.insert(0, "compiled")
    except ImportError:
        pass
    return names


def get_kernels(name=None):
    """Kernel module by name: None/'auto', 'python', or 'compiled'."""
    if name is None or name == "auto":
        return _active
    if name == "python":
        return _kernels_py
    if name == "compiled":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown backend {name!r}")

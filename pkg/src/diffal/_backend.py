"""Selects the compiled kernel backend at import, with a numpy fallback.

Set ``DIFFAL_NO_NATIVE=1`` to force the pure-python kernels (used by the
backend-agreement tests and the benchmark).
"""

from __future__ import annotations

import os

from . import _pykernels

_force_python = os.environ.get("DIFFAL_NO_NATIVE", "") not in ("", "0")

if not _force_python:
    try:
        from . import _native
    except ImportError:
        _native = None
else:
    _native = None

BACKEND = "native" if _native is not None else "python"


def backend_name() -> str:
    """Which kernel implementation this process is running on."""
    return BACKEND


def get_kernels(name: str | None = None):
    """Kernel module by name (``native``/``python``); default is the active one."""
    if name is None:
        name = BACKEND
    if name == "native":
        if _native is None:
            raise RuntimeError("native backend not available in this build")
        return _native
    if name == "python":
        return _pykernels
    raise ValueError(f"unknown backend {name!r}")


csr_multiply_clamp = (_native or _pykernels).csr_multiply_clamp
sgd_epochs = (_native or _pykernels).sgd_epochs

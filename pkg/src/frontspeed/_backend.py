"""Selects the compiled kernels when importable, else the numpy fallback.

Set ``FRONTSPEED_PURE_PYTHON=1`` to force the fallback.
"""
from __future__ import annotations

import os
from types import ModuleType

from . import _fallback

_compiled: ModuleType | None
try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("FRONTSPEED_PURE_PYTHON"):
    kernels: ModuleType = _compiled
else:
    kernels = _fallback

COMPILED = kernels is not _fallback


def get(name: str) -> ModuleType:
    """Return a specific backend: ``"compiled"`` or ``"python"``."""
    if name == "python":
        return _fallback
    if name == "compiled":
        if _compiled is None:
            raise ImportError("frontspeed._kernels is not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")

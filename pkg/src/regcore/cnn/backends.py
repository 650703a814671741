"""Kernel backend selection, in the style of packages that ship a compiled
inner loop with a pure-Python twin: try the extension at import, fall back
silently, and let callers force a choice."""

from __future__ import annotations

import os

from . import kernels_py

try:
    from . import _inner
    HAVE_COMPILED = True
except ImportError:
    _inner = None
    HAVE_COMPILED = False


def available_backends() -> tuple[str, ...]:
    return ("compiled", "numpy") if HAVE_COMPILED else ("numpy",)


def get_backend(name: str | None = None):
    """Kernel module to use: explicit ``name``, else ``REGCORE_KERNEL``,
    else the compiled extension when available."""
    if name is None:
        name = os.environ.get("REGCORE_KERNEL", "").strip().lower() or None
    if name is None:
        name = "compiled" if HAVE_COMPILED else "numpy"
    if name == "compiled":
        if not HAVE_COMPILED:
            raise RuntimeError(
                "compiled kernels requested but regcore.cnn._inner is not built"
            )
        return _inner
    if name == "numpy":
        return kernels_py
    raise ValueError(f"unknown kernel backend {name!r}; use 'compiled' or 'numpy'")

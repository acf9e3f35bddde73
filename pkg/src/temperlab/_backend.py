"""Kernel backend selection: compiled extension if available, pure Python otherwise.

Set TEMPERLAB_BACKEND=python (or =compiled) to force a choice; forcing the
compiled backend raises if the extension is missing.
"""

from __future__ import annotations

import os

from . import _chainpy

_FORCED = os.environ.get("TEMPERLAB_BACKEND", "").strip().lower()

if _FORCED == "python":
    _active = _chainpy
else:
    try:
        from . import _speed as _active  # type: ignore[no-redef]
    except ImportError:
        if _FORCED == "compiled":
            raise
        _active = _chainpy


def get_backend(name: str | None = None):
    """Return the kernel module; ``name`` overrides the import-time choice."""
    if name is None or name == "":
        return _active
    if name == "python":
        return _chainpy
    if name == "compiled":
        from . import _speed
        return _speed
    raise ValueError(f"unknown backend {name!r}")


def backend_name() -> str:
    return _active.BACKEND_NAME

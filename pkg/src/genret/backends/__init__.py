"""Compute-backend selection for the decoder kernels.

The compiled Cython extension is preferred when importable; otherwise the
numpy implementation is used.  ``GENRET_BACKEND=python|native`` forces a
choice (``native`` raises if the extension is unavailable).
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import py as _python_backend

_native_backend = None
_native_error: Exception | None = None
try:
    from . import _core as _native_backend  # type: ignore[no-redef]
except ImportError as exc:  # pragma: no cover - depends on build environment
    _native_error = exc


def available_backends() -> list[str]:
    names = [_python_backend.NAME]
    if _native_backend is not None:
        names.insert(0, _native_backend.NAME)
    return names


def get_backend(name: str | None = None):
    """Resolve a kernel module by name, env var, or availability."""
    requested = name or os.environ.get("GENRET_BACKEND", "auto")
    if requested in ("auto", ""):
        return _native_backend if _native_backend is not None else _python_backend
    if requested == _python_backend.NAME:
        return _python_backend
    if requested == "native":
        if _native_backend is None:
            raise ConfigError(f"native backend unavailable: {_native_error}")
        return _native_backend
    raise ConfigError(f"unknown backend {requested!r}; expected auto, python or native")

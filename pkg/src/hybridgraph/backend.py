"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the NumPy fallback.
``HYBRID_INDEX_BACKEND=python`` forces the fallback.
"""

from __future__ import annotations

import os
from contextlib import contextmanager
from types import ModuleType

from . import _pykernels

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

_BACKENDS: dict[str, ModuleType] = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["cython"] = _ckernels


def available() -> list[str]:
    return sorted(_BACKENDS)


def _default() -> ModuleType:
    want = os.environ.get("HYBRID_INDEX_BACKEND", "").strip().lower()
    if want:
        if want not in _BACKENDS:
            raise ImportError(f"backend {want!r} unavailable; have {available()}")
        return _BACKENDS[want]
    return _ckernels if _ckernels is not None else _pykernels


_active = _default()


def active() -> ModuleType:
    return _active


def name() -> str:
    return _active.NAME


def set_backend(which: str) -> None:
    global _active
    _active = _BACKENDS[which]


@contextmanager
def use(which: str):
    prev = _active
    set_backend(which)
    try:
        yield _active
    finally:
        set_backend(prev.NAME)

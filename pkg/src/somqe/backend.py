"""Kernel backend selection.

Two interchangeable kernel modules implement the hot loops: a compiled
Cython extension (``somqe._kernels_cy``) and a NumPy fallback
(``somqe._kernels_py``). Both perform the same arithmetic in the same
order, so their results are bit-identical; the extension is simply faster.

The extension is preferred when it has been built. Set ``SOMQE_BACKEND`` to
``python`` or ``cython`` before import to force one, or call
:func:`set_backend` at runtime (``somqe bench --backend both`` uses this to
time the two against each other).
"""

from __future__ import annotations

import importlib
import os

from .errors import ConfigError

_BACKEND_MODULES = {"cython": "._kernels_cy", "python": "._kernels_py"}
_loaded: dict = {}
_active = None


def _load(name: str):
    if name not in _BACKEND_MODULES:
        raise ConfigError(
            f"unknown backend {name!r}; expected one of {sorted(_BACKEND_MODULES)}"
        )
    if name not in _loaded:
        try:
            _loaded[name] = importlib.import_module(_BACKEND_MODULES[name], __package__)
        except ImportError as exc:
            raise ConfigError(f"backend {name!r} is not available: {exc}") from exc
    return _loaded[name]


def available_backends() -> tuple[str, ...]:
    """Names of the backends that can be loaded on this installation."""
    names = []
    for name in _BACKEND_MODULES:
        try:
            _load(name)
            names.append(name)
        except ConfigError:
            pass
    return tuple(names)


def set_backend(name: str) -> None:
    """Switch the active kernel backend ("python" or "cython")."""
    global _active
    _active = _load(name)


def backend_name() -> str:
    """Name of the active backend."""
    return kernels().NAME


def kernels():
    """The active kernel module (selecting one on first use)."""
    global _active
    if _active is None:
        forced = os.environ.get("SOMQE_BACKEND")
        if forced:
            _active = _load(forced.strip().lower())
        else:
            try:
                _active = _load("cython")
            except ConfigError:
                _active = _load("python")
    return _active

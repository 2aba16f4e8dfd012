"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python module is
the fallback. ``TRILOC_BACKEND`` overrides the choice: ``auto`` (default),
``compiled``, or ``python``.
"""

from __future__ import annotations

import os

from ..errors import ConfigError
from . import kernels_py


def _load(choice: str):
    if choice == "python":
        return kernels_py
    try:
        from . import _kernels_c

        return _kernels_c
    except ImportError:
        if choice == "compiled":
            raise ConfigError(
                "TRILOC_BACKEND=compiled, but the extension is not built "
                "(run `pip install -e .` or `python setup.py build_ext --inplace`)"
            ) from None
        return kernels_py


_choice = os.environ.get("TRILOC_BACKEND", "auto").strip().lower()
if _choice not in ("auto", "compiled", "python"):
    raise ConfigError(f"unknown TRILOC_BACKEND value {_choice!r}")

kernels = _load(_choice)


def active_backend() -> str:
    """Name of the backend in use: 'compiled' or 'python'."""
    return kernels.NAME


def get_backend(name: str):
    """Fetch a specific backend module (for tests and benchmarks)."""
    if name == "python":
        return kernels_py
    if name == "compiled":
        from . import _kernels_c

        return _kernels_c
    raise ConfigError(f"unknown backend {name!r}")

"""Stepper backend selection.

The compiled Cython stepper is picked at import when available; set
``ZENOCAT_PURE_PYTHON=1`` to force the pure-Python twin.  Both implement the
same algorithm with the same constants.
"""

from __future__ import annotations

import os

from . import _stepper_py

if os.environ.get("ZENOCAT_PURE_PYTHON", "") not in ("", "0"):
    _impl = _stepper_py
    HAVE_EXTENSION = False
else:
    try:
        from . import _stepper as _impl  # type: ignore[no-redef]

        HAVE_EXTENSION = True
    except ImportError:
        _impl = _stepper_py
        HAVE_EXTENSION = False


def backend_name() -> str:
    return _impl.BACKEND_NAME


def get_backend(name: str | None = None):
    """Return a stepper module by name (None = the active default)."""
    if name is None:
        return _impl
    if name == "python":
        return _stepper_py
    if name == "compiled":
        from . import _stepper  # raises ImportError when not built

        return _stepper
    raise ValueError(f"unknown backend {name!r}")


def solve(*args, **kwargs):
    return _impl.solve(*args, **kwargs)

"""Import-time selection between the compiled and pure-numpy kernels.

The compiled extension (``midasvi._kernels``) is preferred when present;
otherwise the pure-numpy twin (``midasvi._ref``) is used.  The environment
variable ``MIDASVI_BACKEND`` forces the choice: ``auto`` (default),
``python``, or ``compiled`` (raising if the extension is missing).
"""
from __future__ import annotations

import os

from . import _ref

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:  # extension not built; pure-python fallback
    _compiled = None

_requested = os.environ.get("MIDASVI_BACKEND", "auto").strip().lower() or "auto"

if _requested == "auto":
    active = _compiled if _compiled is not None else _ref
elif _requested == "python":
    active = _ref
elif _requested == "compiled":
    if _compiled is None:
        raise ImportError(
            "MIDASVI_BACKEND=compiled requested but the compiled extension "
            "is not built; install the package (pip install -e . "
            "--no-build-isolation) or unset MIDASVI_BACKEND"
        )
    active = _compiled
else:
    raise ImportError(f"unknown MIDASVI_BACKEND value {_requested!r}")


def backend_name() -> str:
    """Name of the kernel implementation in use ("compiled" or "python")."""
    return active.name


def available_backends() -> tuple[str, ...]:
    return ("python", "compiled") if _compiled is not None else ("python",)


def get_backend(name: str | None = None):
    """Kernel module by name; ``None`` returns the active default."""
    if name is None:
        return active
    if name == "python":
        return _ref
    if name == "compiled":
        if _compiled is None:
            raise ValueError("compiled backend is not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")

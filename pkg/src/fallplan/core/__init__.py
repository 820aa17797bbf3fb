"""Kernel backend selection.

The compiled extension `_fast` is preferred when importable; set
``FALLPLAN_PURE=1`` to force the pure-Python fallback.  Both expose the same
function set over the containers in :mod:`fallplan.core.arrays`.
"""

import os

from . import _ref
from .arrays import EnvArrays, ModelArrays, Recipe

if os.environ.get("FALLPLAN_PURE") == "1":
    kernels = _ref
else:
    try:
        from . import _fast as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _ref


def backend_name() -> str:
    return kernels.BACKEND


__all__ = ["EnvArrays", "ModelArrays", "Recipe", "kernels", "backend_name", "_ref"]

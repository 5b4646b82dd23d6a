"""Pick the kernel implementation at import time.

The compiled extension is preferred; set ``RPS_PURE_PYTHON=1`` to force the
pure-Python kernels.
"""

import os

from . import _pykernels

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and os.environ.get("RPS_PURE_PYTHON", "") not in ("1", "true", "yes"):
    kernels = _compiled
    BACKEND = "compiled"
else:
    kernels = _pykernels
    BACKEND = "python"


def get_kernels(name=None):
    """Return the kernel module for ``name`` ("compiled", "python" or None for
    the import-time default)."""
    if name is None:
        return kernels
    if name == "python":
        return _pykernels
    if name == "compiled":
        if _compiled is None:
            raise ImportError("the compiled rps._kernels extension is not available")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")

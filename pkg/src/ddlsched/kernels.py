"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the pure-Python
module is used.  Set ``DDLSCHED_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("DDLSCHED_PURE_PYTHON") != "1":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]
        BACKEND = "cython"
    except ImportError:
        pass

heavy_edge_assign = _impl.heavy_edge_assign
best_split = _impl.best_split

__all__ = ["BACKEND", "heavy_edge_assign", "best_split"]

"""Kernel backend selection.

The compiled extension (``relabel._kernels._core``) is preferred; the
pure-NumPy module (``relabel._kernels._ref``) is the drop-in fallback.
Set RELABEL_BACKEND=python or RELABEL_BACKEND=native to force one.
"""

from __future__ import annotations

import os

_requested = os.environ.get("RELABEL_BACKEND", "").strip().lower()

if _requested not in ("", "auto", "python", "native"):
    raise ImportError(f"RELABEL_BACKEND={_requested!r}: expected 'python' or 'native'")

if _requested == "python":
    from . import _ref as _impl
elif _requested == "native":
    from . import _core as _impl  # type: ignore[no-redef]
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _ref as _impl

BACKEND = _impl.BACKEND
softmax_topk = _impl.softmax_topk
pool_dense = _impl.pool_dense
pool_sparse = _impl.pool_sparse

__all__ = ["BACKEND", "softmax_topk", "pool_dense", "pool_sparse"]

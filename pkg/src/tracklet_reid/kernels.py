"""Backend selection for the hot kernels.

The compiled extension is used when it was built; setting
``TRACKLET_REID_PURE=1`` forces the pure-Python implementation.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("TRACKLET_REID_PURE") != "1":
    try:
        from . import _ckernels as _impl

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels
else:
    _impl = _pykernels

solve_square = _impl.solve_square
iou_matrix = _impl.iou_matrix

__all__ = ["BACKEND", "solve_square", "iou_matrix"]

"""Numeric inner loops shared by matching, evaluation and the classifiers.

Every kernel exists twice: a numba-compiled version (``_numba``) and a
vectorised numpy version (``_numpy``) with identical semantics. The backend
is picked once at import time:

    SANIPIPE_KERNELS=numpy   force the numpy path
    SANIPIPE_KERNELS=numba   require numba (ImportError if missing)

Unset, numba is used when importable.
"""

import os

_requested = os.environ.get("SANIPIPE_KERNELS", "").strip().lower()

if _requested not in ("", "numba", "numpy"):
    raise ValueError(f"SANIPIPE_KERNELS must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numpy":
    from . import _numpy as _impl
    BACKEND = "numpy"
else:
    try:
        from . import _numba as _impl
        BACKEND = "numba"
    except ImportError:
        if _requested == "numba":
            raise
        from . import _numpy as _impl
        BACKEND = "numpy"

token_ranges = _impl.token_ranges
token_overlap_mask = _impl.token_overlap_mask
fully_covered = _impl.fully_covered
dominant_spans = _impl.dominant_spans
greedy_spans = _impl.greedy_spans
range_any = _impl.range_any
range_all = _impl.range_all
logreg_loss_grad = _impl.logreg_loss_grad

__all__ = [
    "BACKEND",
    "token_ranges",
    "token_overlap_mask",
    "fully_covered",
    "dominant_spans",
    "greedy_spans",
    "range_any",
    "range_all",
    "logreg_loss_grad",
]

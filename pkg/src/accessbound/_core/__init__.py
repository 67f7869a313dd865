"""Kernel backend selection.

The compiled extension is preferred; set ``ACCESSBOUND_PURE_PYTHON=1`` to
force the numpy fallback (the benchmark and the equivalence tests do this
by importing both modules directly).
"""

import os

from . import fallback

BACKEND = "python"
_impl = fallback

if not os.environ.get("ACCESSBOUND_PURE_PYTHON"):
    try:
        from . import _kernels as _impl  # noqa: F811

        BACKEND = "compiled"
    except ImportError:
        pass

transformer_forward = _impl.transformer_forward
transformer_backward = _impl.transformer_backward
nearest_class_search = _impl.nearest_class_search

NORM_KINDS = {"none": fallback.NORM_NONE, "linf": fallback.NORM_LINF, "rms": fallback.NORM_RMS}

__all__ = ["BACKEND", "NORM_KINDS", "transformer_forward", "transformer_backward",
           "nearest_class_search"]

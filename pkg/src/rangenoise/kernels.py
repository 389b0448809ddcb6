"""Backend selection for the per-pixel kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is loaded. Setting ``RANGENOISE_PURE_PYTHON=1`` forces the
fallback. Both backends return identical bits.
"""
import os

from . import _pykernels

if os.environ.get("RANGENOISE_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "numpy"

hash_counters = _impl.hash_counters
plane_depth = _impl.plane_depth
remap_nearest = _impl.remap_nearest


def available_backends():
    """Map backend name -> module, for tests and benchmarks."""
    backends = {"numpy": _pykernels}
    try:
        from . import _ckernels
    except ImportError:
        pass
    else:
        backends["cython"] = _ckernels
    return backends

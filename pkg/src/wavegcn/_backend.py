"""Select the kernel implementation at import time.

The Cython extension is used when it was built; ``WAVEGCN_PURE_PYTHON=1``
forces the numpy fallback.
"""
import os

from . import _pykernels

if os.environ.get("WAVEGCN_PURE_PYTHON"):
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        kernels = _pykernels

BACKEND = "cython" if kernels is not _pykernels else "python"


def use(name):
    """Switch the active backend ("cython" or "python"); returns the previous name."""
    global kernels, BACKEND
    previous = BACKEND
    if name == "python":
        kernels = _pykernels
    elif name == "cython":
        from . import _ckernels
        kernels = _ckernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    BACKEND = name
    return previous

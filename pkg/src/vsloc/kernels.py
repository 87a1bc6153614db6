"""Backend selection for the hot loops.

The compiled extension is used when it imports; set ``VSLOC_PURE_PYTHON=1``
to force the numpy fallback.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("VSLOC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        pass
    else:
        _impl = _compiled
        BACKEND = "cython"


def get_backend(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None)."""
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels
        return _kernels
    raise ValueError(f"unknown kernel backend {name!r}")


def accumulate_impulses(out, delays, weights, rows, half_width):
    return _impl.accumulate_impulses(out, delays, weights, rows, half_width)


def trace_rain(*args):
    return _impl.trace_rain(*args)

"""Backend selection for the hot kernels.

The compiled extension is preferred. Setting ``BILEVEL_MI_BACKEND=python``
forces the numpy implementation, which is also used when the extension was
not built.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("BILEVEL_MI_BACKEND", "").lower() != "python":
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

prox_logistic_array = _impl.prox_logistic_array
logistic_normal = _impl.logistic_normal
tail_moments = _impl.tail_moments


def get_backend(name):
    """Return the kernel module for ``name`` ("python" or "cython")."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")

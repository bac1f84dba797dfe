"""Selects the convolution backend at import time.

The compiled extension is preferred when present; the numpy implementation
is the fallback. Set UDALAB_BACKEND=numpy or =cython to force one (forcing
cython raises if the extension is missing).
"""

import os

from . import _kernels_np

_requested = os.environ.get("UDALAB_BACKEND", "auto").lower()

if _requested == "numpy":
    _impl = _kernels_np
    BACKEND = "numpy"
elif _requested in ("auto", "cython"):
    try:
        from . import _fastconv as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        if _requested == "cython":
            raise
        _impl = _kernels_np
        BACKEND = "numpy"
else:
    raise ValueError(f"unknown UDALAB_BACKEND value: {_requested!r}")

conv2d_forward = _impl.conv2d_forward
conv2d_backward_input = _impl.conv2d_backward_input
conv2d_backward_kernel = _impl.conv2d_backward_kernel
conv1d_forward = _impl.conv1d_forward
conv1d_backward_input = _impl.conv1d_backward_input
conv1d_backward_kernel = _impl.conv1d_backward_kernel


def implementations():
    """Both kernel implementations, keyed by name (for tests and benchmarks)."""
    impls = {"numpy": _kernels_np}
    try:
        from . import _fastconv

        impls["cython"] = _fastconv
    except ImportError:
        pass
    return impls

"""Numeric hot kernels with a compiled core and a pure-numpy fallback.

The compiled extension is picked at import time when present; set the
environment variable ``MTSPOOL_PURE_PYTHON=1`` to force the fallback.
``BACKEND`` names the implementation in use ("compiled" or "python").
"""

import os

import numpy as np

from . import pykernels

if os.environ.get("MTSPOOL_PURE_PYTHON"):
    _impl = pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        _impl = pykernels
        BACKEND = "python"

__all__ = [
    "BACKEND",
    "dtw_distance",
    "conv1d_forward",
    "conv1d_grad_input",
    "conv1d_grad_weights",
    "conv1d_grad_bias",
]


def _c64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def dtw_distance(a, b, window=-1):
    """DTW distance between two 1-D series (absolute-value local cost)."""
    return float(_impl.dtw_distance(_c64(a), _c64(b), int(window)))


def conv1d_forward(x, weights, bias):
    return _impl.conv1d_forward(_c64(x), _c64(weights), _c64(bias))


def conv1d_grad_input(grad_out, weights, series_length):
    return _impl.conv1d_grad_input(_c64(grad_out), _c64(weights), int(series_length))


def conv1d_grad_weights(grad_out, x, kernel_size):
    return _impl.conv1d_grad_weights(_c64(grad_out), _c64(x), int(kernel_size))


def conv1d_grad_bias(grad_out):
    return _impl.conv1d_grad_bias(_c64(grad_out))

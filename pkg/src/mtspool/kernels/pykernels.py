"""Pure numpy implementations of the hot kernels.

Used as the fallback when the compiled extension is unavailable, and as the
reference the extension is tested against.
"""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_INF = float("inf")


def dtw_distance(a, b, window=-1):
    """Dynamic time warping distance with absolute-value local cost.

    Classic O(len(a)*len(b)) dynamic program; each alignment step moves one
    cell right, down, or diagonally.  ``window`` restricts the warping path to
    the Sakoe-Chiba band |i - j| <= window; a negative value means no band.
    """
    la, lb = len(a), len(b)
    if la == 0 or lb == 0:
        raise ValueError("dtw_distance requires non-empty series")
    if window >= 0:
        # A band narrower than the length difference admits no path.
        window = max(window, abs(la - lb))
    av = [float(v) for v in a]
    bv = [float(v) for v in b]
    prev = [_INF] * lb
    cur = [_INF] * lb
    for i in range(la):
        lo = 0 if window < 0 else max(0, i - window)
        hi = lb if window < 0 else min(lb, i + window + 1)
        ai = av[i]
        for j in range(lo, hi):
            cost = abs(ai - bv[j])
            if i == 0 and j == 0:
                cur[j] = cost
                continue
            best = _INF
            if i > 0 and prev[j] < best:
                best = prev[j]
            if j > 0 and cur[j - 1] < best:
                best = cur[j - 1]
            if i > 0 and j > 0 and prev[j - 1] < best:
                best = prev[j - 1]
            cur[j] = cost + best
        prev, cur = cur, prev
        for j in range(lb):
            cur[j] = _INF
    return prev[lb - 1]


def conv1d_forward(x, weights, bias):
    """Valid cross-correlation of each row of x with every kernel.

    x: (n, T), weights: (c, ks), bias: (c,) -> (n, c, T - ks + 1)
    """
    ks = weights.shape[1]
    windows = sliding_window_view(x, ks, axis=1)  # (n, L, ks)
    out = np.tensordot(windows, weights, axes=([2], [1]))  # (n, L, c)
    out = np.ascontiguousarray(out.transpose(0, 2, 1))
    out += bias[None, :, None]
    return out


def conv1d_grad_input(grad_out, weights, series_length):
    """Gradient of conv1d_forward w.r.t. x.  grad_out: (n, c, L) -> (n, T)."""
    n, c, L = grad_out.shape
    ks = weights.shape[1]
    pad = np.zeros((n, c, L + 2 * (ks - 1)), dtype=grad_out.dtype)
    pad[:, :, ks - 1 : ks - 1 + L] = grad_out
    windows = sliding_window_view(pad, ks, axis=2)  # (n, c, T, ks)
    flipped = weights[:, ::-1]
    grad_x = np.tensordot(windows, flipped, axes=([1, 3], [0, 1]))  # (n, T)
    if grad_x.shape[1] != series_length:
        raise ValueError(
            f"inconsistent shapes: expected T={series_length}, got {grad_x.shape[1]}"
        )
    return np.ascontiguousarray(grad_x)


def conv1d_grad_weights(grad_out, x, kernel_size):
    """Gradient of conv1d_forward w.r.t. the kernels.  -> (c, ks)."""
    windows = sliding_window_view(x, kernel_size, axis=1)  # (n, L, ks)
    return np.tensordot(grad_out, windows, axes=([0, 2], [0, 1]))  # (c, ks)


def conv1d_grad_bias(grad_out):
    """Gradient of conv1d_forward w.r.t. the per-channel bias.  -> (c,)."""
    return grad_out.sum(axis=(0, 2))

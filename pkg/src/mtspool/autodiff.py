"""Dense tensors with reverse-mode differentiation.

A define-by-run design: operations executed inside a ``with Tape():`` block
record their backward rules onto that tape, and ``Tape.backward(loss)``
replays them in reverse, accumulating gradients additively into every tensor
created with ``requires_grad=True``.  Outside a tape block the same functions
are plain forward computations.

All storage is float64.  Only the shapes the pipeline needs are supported:
matrices for most operations, plus the small amount of 3-D handling required
by convolution outputs and multi-head centroid stacks.
"""

from __future__ import annotations

import threading

import numpy as np

from . import kernels
from .errors import ConfigurationError, ContractError, DimensionError

_LOCAL = threading.local()


def _tape_stack() -> list:
    stack = getattr(_LOCAL, "stack", None)
    if stack is None:
        stack = []
        _LOCAL.stack = stack
    return stack


def _active_tape():
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """A dense float64 array with an optional gradient slot."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: np.ndarray | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def size(self) -> int:
        return self.data.size

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


class Tape:
    """Ordered record of one forward pass; replayed once, in reverse."""

    def __init__(self):
        self._backward_rules = []
        self._consumed = False

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb):
        stack = _tape_stack()
        if not stack or stack[-1] is not self:
            raise ContractError("tape stack corrupted: exited a non-innermost tape")
        stack.pop()
        return False

    def record(self, rule) -> None:
        self._backward_rules.append(rule)

    def backward(self, loss: Tensor) -> None:
        """Accumulate d(loss)/d(leaf) into every recorded tensor's grad."""
        if loss.size != 1:
            raise ContractError(f"backward requires a scalar loss, got shape {loss.shape}")
        if self._consumed:
            raise ContractError("backward was already run on this tape")
        self._consumed = True
        loss.grad = np.ones_like(loss.data)
        for rule in reversed(self._backward_rules):
            rule()


def backward(tape: Tape, loss: Tensor) -> None:
    tape.backward(loss)


def _accumulate(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        # Copy: g may alias another tensor's grad buffer (identity-like rules).
        t.grad = np.array(g)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum g down to ``shape`` (inverse of numpy broadcasting)."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, dim in enumerate(shape):
        if dim == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _record(out: Tensor, inputs: tuple[Tensor, ...], rule) -> Tensor:
    tape = _active_tape()
    if tape is not None and any(t.requires_grad for t in inputs):
        out.requires_grad = True
        tape.record(rule)
    return out


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ---------------------------------------------------------------------------
# arithmetic


def add(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data + b.data)

    def rule():
        if out.grad is None:
            return
        if a.requires_grad:
            _accumulate(a, _unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(out.grad, b.data.shape))

    return _record(out, (a, b), rule)


def subtract(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data - b.data)

    def rule():
        if out.grad is None:
            return
        if a.requires_grad:
            _accumulate(a, _unbroadcast(out.grad, a.data.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(-out.grad, b.data.shape))

    return _record(out, (a, b), rule)


def hadamard(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data * b.data)
    ad, bd = a.data, b.data

    def rule():
        if out.grad is None:
            return
        if a.requires_grad:
            _accumulate(a, _unbroadcast(out.grad * bd, ad.shape))
        if b.requires_grad:
            _accumulate(b, _unbroadcast(out.grad * ad, bd.shape))

    return _record(out, (a, b), rule)


def scale(x: Tensor, factor: float) -> Tensor:
    out = Tensor(x.data * factor)

    def rule():
        if out.grad is not None and x.requires_grad:
            _accumulate(x, out.grad * factor)

    return _record(out, (x,), rule)


def add_scalar(x: Tensor, value: float) -> Tensor:
    out = Tensor(x.data + value)

    def rule():
        if out.grad is not None and x.requires_grad:
            _accumulate(x, out.grad)

    return _record(out, (x,), rule)


def negate(x: Tensor) -> Tensor:
    return scale(x, -1.0)


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise DimensionError(f"matmul: shapes {a.shape} and {b.shape} do not align")
    out = Tensor(a.data @ b.data)
    ad, bd = a.data, b.data

    def rule():
        if out.grad is None:
            return
        if a.requires_grad:
            _accumulate(a, out.grad @ bd.T)
        if b.requires_grad:
            _accumulate(b, ad.T @ out.grad)

    return _record(out, (a, b), rule)


# ---------------------------------------------------------------------------
# elementwise nonlinearities

_ELEMENTWISE = {"relu", "sigmoid", "tanh", "identity"}


def elementwise(x: Tensor, fn: str) -> Tensor:
    """Apply one of {relu, sigmoid, tanh, identity} per element."""
    if fn == "identity":
        out = Tensor(x.data.copy())

        def rule():
            if out.grad is not None and x.requires_grad:
                _accumulate(x, out.grad)

    elif fn == "relu":
        out = Tensor(np.maximum(x.data, 0.0))
        mask = x.data > 0

        def rule():
            if out.grad is not None and x.requires_grad:
                _accumulate(x, out.grad * mask)

    elif fn == "sigmoid":
        y = 1.0 / (1.0 + np.exp(-x.data))
        out = Tensor(y)

        def rule():
            if out.grad is not None and x.requires_grad:
                _accumulate(x, out.grad * y * (1.0 - y))

    elif fn == "tanh":
        y = np.tanh(x.data)
        out = Tensor(y)

        def rule():
            if out.grad is not None and x.requires_grad:
                _accumulate(x, out.grad * (1.0 - y * y))

    else:
        raise ConfigurationError(f"unknown elementwise function {fn!r}")
    return _record(out, (x,), rule)


def relu(x: Tensor) -> Tensor:
    return elementwise(x, "relu")


def sigmoid(x: Tensor) -> Tensor:
    return elementwise(x, "sigmoid")


def tanh(x: Tensor) -> Tensor:
    return elementwise(x, "tanh")


def log(x: Tensor, floor: float = 0.0) -> Tensor:
    """Natural log of max(x, floor); gradient is zero below the floor."""
    clipped = np.maximum(x.data, floor)
    out = Tensor(np.log(clipped))
    above = x.data > floor

    def rule():
        if out.grad is not None and x.requires_grad:
            _accumulate(x, np.where(above, out.grad / clipped, 0.0))

    return _record(out, (x,), rule)


# ---------------------------------------------------------------------------
# structural ops


def reshape(x: Tensor, shape) -> Tensor:
    out = Tensor(x.data.reshape(shape))
    orig = x.data.shape

    def rule():
        if out.grad is not None and x.requires_grad:
            _accumulate(x, out.grad.reshape(orig))

    return _record(out, (x,), rule)


def transpose(x: Tensor) -> Tensor:
    if x.data.ndim != 2:
        raise DimensionError(f"transpose expects a matrix, got shape {x.shape}")
    out = Tensor(x.data.T.copy())

    def rule():
        if out.grad is not None and x.requires_grad:
            _accumulate(x, out.grad.T)

    return _record(out, (x,), rule)


def concat(parts, axis: int = 0) -> Tensor:
    parts = list(parts)
    out = Tensor(np.concatenate([p.data for p in parts], axis=axis))
    sizes = [p.data.shape[axis] for p in parts]
    offsets = np.cumsum([0] + sizes)

    def rule():
        if out.grad is None:
            return
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            if p.requires_grad:
                idx = [slice(None)] * out.grad.ndim
                idx[axis] = slice(lo, hi)
                _accumulate(p, out.grad[tuple(idx)])

    return _record(out, tuple(parts), rule)


def reduce_sum(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.sum(axis=axis, keepdims=keepdims))
    shape = x.data.shape

    def rule():
        if out.grad is None or not x.requires_grad:
            return
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, shape))

    return _record(out, (x,), rule)


def reduce_mean(x: Tensor, axis: int | None = None, keepdims: bool = False) -> Tensor:
    count = x.data.size if axis is None else x.data.shape[axis]
    out = Tensor(x.data.mean(axis=axis, keepdims=keepdims))
    shape = x.data.shape

    def rule():
        if out.grad is None or not x.requires_grad:
            return
        g = out.grad
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, np.broadcast_to(g, shape) / count)

    return _record(out, (x,), rule)


def reduce_max(x: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    out = Tensor(x.data.max(axis=axis, keepdims=keepdims))
    maxima = x.data.max(axis=axis, keepdims=True)
    mask = x.data == maxima
    # Ties share the gradient evenly.
    mask = mask / mask.sum(axis=axis, keepdims=True)

    def rule():
        if out.grad is None or not x.requires_grad:
            return
        g = out.grad
        if not keepdims:
            g = np.expand_dims(g, axis)
        _accumulate(x, mask * g)

    return _record(out, (x,), rule)


# ---------------------------------------------------------------------------
# row-wise matrix ops


def softmax_rows(x: Tensor) -> Tensor:
    """Row-wise softmax, stabilized by subtracting each row's maximum."""
    if x.data.ndim != 2:
        raise DimensionError(f"softmax_rows expects a matrix, got shape {x.shape}")
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=1, keepdims=True)
    out = Tensor(y)

    def rule():
        if out.grad is None or not x.requires_grad:
            return
        g = out.grad
        _accumulate(x, y * (g - (g * y).sum(axis=1, keepdims=True)))

    return _record(out, (x,), rule)


def row_normalize(x: Tensor) -> Tensor:
    """Divide each row by its sum; rows summing to exactly 0 pass through."""
    if x.data.ndim != 2:
        raise DimensionError(f"row_normalize expects a matrix, got shape {x.shape}")
    sums = x.data.sum(axis=1, keepdims=True)
    zero = sums == 0.0
    safe = np.where(zero, 1.0, sums)
    y = np.where(zero, x.data, x.data / safe)
    out = Tensor(y)
    xd = x.data

    def rule():
        if out.grad is None or not x.requires_grad:
            return
        g = out.grad
        normal = g / safe - (g * xd).sum(axis=1, keepdims=True) / (safe * safe)
        _accumulate(x, np.where(zero, g, normal))

    return _record(out, (x,), rule)


def cosine_rows(a: Tensor, b: Tensor) -> Tensor:
    """Pairwise cosine similarity between rows of a and rows of b.

    Rows that are exactly zero have similarity 0 against everything (and
    receive zero gradient), keeping the operation total.
    """
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[1]:
        raise DimensionError(f"cosine_rows: shapes {a.shape} and {b.shape} do not align")
    na = np.linalg.norm(a.data, axis=1, keepdims=True)
    nb = np.linalg.norm(b.data, axis=1, keepdims=True)
    za = na == 0.0
    zb = nb == 0.0
    sa = np.where(za, 1.0, na)
    sb = np.where(zb, 1.0, nb)
    ua = a.data / sa
    ub = b.data / sb
    c = ua @ ub.T
    c[za[:, 0], :] = 0.0
    c[:, zb[:, 0]] = 0.0
    out = Tensor(c)

    def rule():
        if out.grad is None:
            return
        g = out.grad.copy()
        g[za[:, 0], :] = 0.0
        g[:, zb[:, 0]] = 0.0
        if a.requires_grad:
            ga = (g @ ub - (g * c).sum(axis=1, keepdims=True) * ua) / sa
            _accumulate(a, ga)
        if b.requires_grad:
            gb = (g.T @ ua - (g * c).sum(axis=0)[:, None] * ub) / sb
            _accumulate(b, gb)

    return _record(out, (a, b), rule)


# ---------------------------------------------------------------------------
# convolution


def conv1d_valid(x: Tensor, kernel: Tensor, bias: Tensor) -> Tensor:
    """Valid cross-correlation: (n, T) * (c, ks) + (c,) -> (n, c, T-ks+1)."""
    n, t_len = x.data.shape
    c, ks = kernel.data.shape
    if ks > t_len:
        raise ConfigurationError(f"kernel size {ks} exceeds series length {t_len}")
    out = Tensor(kernels.conv1d_forward(x.data, kernel.data, bias.data))
    xd, kd = x.data, kernel.data

    def rule():
        if out.grad is None:
            return
        g = out.grad
        if x.requires_grad:
            _accumulate(x, kernels.conv1d_grad_input(g, kd, t_len))
        if kernel.requires_grad:
            _accumulate(kernel, kernels.conv1d_grad_weights(g, xd, ks))
        if bias.requires_grad:
            _accumulate(bias, kernels.conv1d_grad_bias(g))

    return _record(out, (x, kernel, bias), rule)


# ---------------------------------------------------------------------------
# batch normalization


class BatchNormState:
    """Trainable affine parameters plus running statistics for one layer."""

    def __init__(self, width: int, momentum: float = 0.1, eps: float = 1e-5):
        self.gamma = Tensor(np.ones(width), requires_grad=True)
        self.beta = Tensor(np.zeros(width), requires_grad=True)
        self.running_mean = np.zeros(width)
        self.running_var = np.ones(width)
        self.momentum = momentum
        self.eps = eps


def batch_norm(x: Tensor, state: BatchNormState, mode: str) -> Tensor:
    """Column-wise standardization with affine transform.

    Train mode normalizes with the batch statistics (biased variance) and
    updates the running statistics in place; eval mode uses the frozen
    running statistics.
    """
    if mode not in ("train", "eval"):
        raise ContractError(f"batch_norm mode must be 'train' or 'eval', got {mode!r}")
    if x.data.ndim != 2 or x.data.shape[0] < 1:
        raise DimensionError(f"batch_norm expects a non-empty matrix, got shape {x.shape}")
    gamma, beta = state.gamma, state.beta
    eps = state.eps
    if mode == "train":
        mu = x.data.mean(axis=0)
        var = x.data.var(axis=0)
        m = state.momentum
        state.running_mean = (1.0 - m) * state.running_mean + m * mu
        state.running_var = (1.0 - m) * state.running_var + m * var
    else:
        mu = state.running_mean
        var = state.running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv_std
    out = Tensor(gamma.data * xhat + beta.data)
    n = x.data.shape[0]
    train = mode == "train"

    def rule():
        if out.grad is None:
            return
        g = out.grad
        if gamma.requires_grad:
            _accumulate(gamma, (g * xhat).sum(axis=0))
        if beta.requires_grad:
            _accumulate(beta, g.sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            if train:
                dx = (gx - gx.mean(axis=0) - xhat * (gx * xhat).mean(axis=0)) * inv_std
            else:
                dx = gx * inv_std
            _accumulate(x, dx)

    return _record(out, (x, gamma, beta), rule)

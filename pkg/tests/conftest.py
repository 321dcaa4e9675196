import numpy as np
import pytest

from mtspool.autodiff import Tape, Tensor


def central_difference(f, tensors, step=1e-5):
    """Numeric gradient of scalar-valued f w.r.t. each tensor, by central
    finite differences.  f is called with no arguments and reads the tensors'
    current data in place."""
    grads = []
    for t in tensors:
        g = np.zeros_like(t.data)
        flat = t.data.ravel()
        gflat = g.ravel()
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            hi = float(np.asarray(f()))
            flat[i] = orig - step
            lo = float(np.asarray(f()))
            flat[i] = orig
            gflat[i] = (hi - lo) / (2.0 * step)
        grads.append(g)
    return grads


def relative_error(analytic, numeric):
    """Max elementwise |a - n| / max(1, |a|, |n|)."""
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(1.0, np.maximum(np.abs(a), np.abs(n)))
    return float(np.max(np.abs(a - n) / denom))


def check_gradients(build_loss, params, tol=1e-4, step=1e-5):
    """Assert analytic gradients of build_loss() match central differences.

    build_loss must construct the forward pass from scratch on each call and
    return the scalar loss Tensor.
    """
    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = build_loss()
    tape.backward(loss)
    analytic = [None if p.grad is None else p.grad.copy() for p in params]
    numeric = central_difference(lambda: build_loss().data, params, step=step)
    worst = 0.0
    for p, a, n in zip(params, analytic, numeric):
        assert a is not None, f"no gradient accumulated for parameter {p!r}"
        worst = max(worst, relative_error(a, n))
    assert worst < tol, f"gradient mismatch: relative error {worst:.3e} >= {tol}"
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def rand_tensor(rng, shape, requires_grad=True, scale=1.0):
    return Tensor(rng.standard_normal(shape) * scale, requires_grad=requires_grad)

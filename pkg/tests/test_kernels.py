"""Kernel backends: hand-checked values, exhaustive DTW oracle, and
compiled-vs-python agreement."""

import itertools

import numpy as np
import pytest

from mtspool import kernels
from mtspool.kernels import pykernels


def brute_force_dtw(a, b):
    """Minimum total |a_i - b_j| over all monotone alignment paths."""
    best = [np.inf]

    def walk(i, j, acc):
        acc += abs(a[i] - b[j])
        if acc >= best[0]:
            return
        if i == len(a) - 1 and j == len(b) - 1:
            best[0] = acc
            return
        if i + 1 < len(a):
            walk(i + 1, j, acc)
        if j + 1 < len(b):
            walk(i, j + 1, acc)
        if i + 1 < len(a) and j + 1 < len(b):
            walk(i + 1, j + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


BACKENDS = [kernels, pykernels]
IDS = [f"selected-{kernels.BACKEND}", "python"]


@pytest.mark.parametrize("impl", BACKENDS, ids=IDS)
class TestDtw:
    def test_identical_series(self, impl):
        a = np.array([1.0, 5.0, -2.0])
        assert impl.dtw_distance(a, a) == 0.0

    def test_hand_example(self, impl):
        assert impl.dtw_distance(np.array([1.0, 2, 3]), np.array([2.0, 3, 4])) == 2.0

    def test_single_points(self, impl):
        assert impl.dtw_distance(np.array([3.0]), np.array([7.5])) == 4.5

    def test_matches_brute_force(self, impl):
        rng = np.random.default_rng(7)
        for _ in range(100):
            la = int(rng.integers(1, 7))
            lb = int(rng.integers(1, 7))
            a = rng.integers(-5, 6, la).astype(float)
            b = rng.integers(-5, 6, lb).astype(float)
            got = impl.dtw_distance(a, b)
            want = brute_force_dtw(a, b)
            assert got == pytest.approx(want, abs=1e-12)

    def test_band_wide_enough_is_exact(self, impl):
        rng = np.random.default_rng(13)
        a = rng.standard_normal(40)
        b = rng.standard_normal(40)
        full = impl.dtw_distance(a, b)
        assert impl.dtw_distance(a, b, window=40) == pytest.approx(full)

    def test_band_never_below_full(self, impl):
        rng = np.random.default_rng(17)
        a = rng.standard_normal(30)
        b = rng.standard_normal(30)
        full = impl.dtw_distance(a, b)
        banded = impl.dtw_distance(a, b, window=3)
        assert banded >= full - 1e-12

    def test_band_widens_monotonically(self, impl):
        rng = np.random.default_rng(19)
        a = rng.standard_normal(25)
        b = rng.standard_normal(25)
        prev = np.inf
        for w in (1, 3, 8, 25):
            d = impl.dtw_distance(a, b, window=w)
            assert d <= prev + 1e-12
            prev = d

    def test_unequal_lengths_with_band(self, impl):
        # Band narrower than the length difference must still admit a path.
        a = np.arange(10.0)
        b = np.arange(3.0)
        d = impl.dtw_distance(a, b, window=1)
        assert np.isfinite(d)

    def test_empty_rejected(self, impl):
        with pytest.raises(ValueError):
            impl.dtw_distance(np.array([]), np.array([1.0]))


@pytest.mark.parametrize("impl", BACKENDS, ids=IDS)
class TestConv1d:
    def test_constant_input(self, impl):
        out = impl.conv1d_forward(
            np.ones((1, 5)), np.ones((1, 3)), np.zeros(1)
        )
        assert np.array_equal(out, np.full((1, 1, 3), 3.0))

    def test_shift_kernel(self, impl):
        out = impl.conv1d_forward(
            np.array([[1.0, 2.0, 3.0]]), np.array([[1.0, 0.0]]), np.zeros(1)
        )
        assert np.array_equal(out, np.array([[[1.0, 2.0]]]))

    def test_zero_input_bias_only(self, impl):
        out = impl.conv1d_forward(
            np.zeros((2, 4)), np.array([[0.5, -0.5]]), np.array([5.0])
        )
        assert np.array_equal(out, np.full((2, 1, 3), 5.0))

    def test_grad_input_shape_check(self, impl):
        g = np.ones((1, 1, 3))
        w = np.ones((1, 3))
        with pytest.raises(ValueError):
            impl.conv1d_grad_input(g, w, series_length=99)


def test_backends_agree():
    rng = np.random.default_rng(23)
    for _ in range(20):
        n = int(rng.integers(1, 6))
        t_len = int(rng.integers(4, 40))
        ks = int(rng.integers(1, min(t_len, 8) + 1))
        c = int(rng.integers(1, 7))
        x = rng.standard_normal((n, t_len))
        w = rng.standard_normal((c, ks))
        b = rng.standard_normal(c)
        fc = kernels._c64  # normalization helper shared by both paths
        out_c = pykernels.conv1d_forward(fc(x), fc(w), fc(b))
        out_s = kernels.conv1d_forward(x, w, b)
        np.testing.assert_allclose(out_s, out_c, atol=1e-12)
        g = rng.standard_normal(out_c.shape)
        np.testing.assert_allclose(
            kernels.conv1d_grad_input(g, w, t_len),
            pykernels.conv1d_grad_input(fc(g), fc(w), t_len),
            atol=1e-12,
        )
        np.testing.assert_allclose(
            kernels.conv1d_grad_weights(g, x, ks),
            pykernels.conv1d_grad_weights(fc(g), fc(x), ks),
            atol=1e-12,
        )
        np.testing.assert_allclose(
            kernels.conv1d_grad_bias(g), pykernels.conv1d_grad_bias(fc(g)), atol=1e-12
        )
        a = rng.standard_normal(int(rng.integers(1, 50)))
        bb = rng.standard_normal(int(rng.integers(1, 50)))
        for w_band in (-1, 2, 10):
            assert kernels.dtw_distance(a, bb, w_band) == pytest.approx(
                pykernels.dtw_distance(a, bb, w_band), abs=1e-12
            )

#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-numpy fallback.

Run after building the extension:

    python benchmarks/bench_kernels.py
"""

import time

import numpy as np

from mtspool import kernels
from mtspool.kernels import pykernels


def timeit(fn, *args, repeats=5, min_time=0.05):
    # warm up, then take the best of `repeats` batched runs
    fn(*args)
    best = float("inf")
    for _ in range(repeats):
        calls = 0
        start = time.perf_counter()
        while True:
            fn(*args)
            calls += 1
            elapsed = time.perf_counter() - start
            if elapsed >= min_time:
                break
        best = min(best, elapsed / calls)
    return best


def row(label, compiled_s, python_s):
    speedup = python_s / compiled_s if compiled_s > 0 else float("inf")
    print(f"{label:<44} {compiled_s * 1e3:>10.3f} {python_s * 1e3:>10.3f} {speedup:>8.1f}x")


def main():
    if kernels.BACKEND != "compiled":
        print("warning: compiled backend not available; comparing python vs python")
    print(f"selected backend: {kernels.BACKEND}")
    print(f"{'kernel':<44} {'compiled ms':>10} {'python ms':>10} {'speedup':>8}")
    rng = np.random.default_rng(0)

    for t_len in (128, 512, 1024, 3000):
        a = rng.standard_normal(t_len)
        b = rng.standard_normal(t_len)
        window = -1 if t_len <= 512 else max(1, t_len // 10)
        label = f"dtw T={t_len}" + (f" band={window}" if window > 0 else " full")
        row(
            label,
            timeit(kernels.dtw_distance, a, b, window),
            timeit(pykernels.dtw_distance, a, b, window),
        )

    for n, t_len in ((2, 45), (4, 64), (2, 640), (28, 50), (61, 405)):
        x = rng.standard_normal((n, t_len))
        for ks in (3, 7):
            if ks > t_len:
                continue
            w = rng.standard_normal((10, ks))
            bias = rng.standard_normal(10)
            row(
                f"conv1d fwd n={n} T={t_len} ks={ks}",
                timeit(kernels.conv1d_forward, x, w, bias),
                timeit(pykernels.conv1d_forward, x, w, bias),
            )
            g = rng.standard_normal((n, 10, t_len - ks + 1))
            row(
                f"conv1d grad-in n={n} T={t_len} ks={ks}",
                timeit(kernels.conv1d_grad_input, g, w, t_len),
                timeit(pykernels.conv1d_grad_input, g, w, t_len),
            )
            row(
                f"conv1d grad-w n={n} T={t_len} ks={ks}",
                timeit(kernels.conv1d_grad_weights, g, x, ks),
                timeit(pykernels.conv1d_grad_weights, g, x, ks),
            )


if __name__ == "__main__":
    main()

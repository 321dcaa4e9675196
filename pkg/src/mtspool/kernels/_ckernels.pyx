# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: DTW dynamic program and 1-D valid convolution."""

import numpy as np

cimport numpy as cnp

cnp.import_array()

cdef extern from "math.h":
    double fabs(double x) nogil

cdef double INF = float("inf")


def dtw_distance(double[::1] a, double[::1] b, int window=-1):
    cdef Py_ssize_t la = a.shape[0]
    cdef Py_ssize_t lb = b.shape[0]
    if la == 0 or lb == 0:
        raise ValueError("dtw_distance requires non-empty series")
    cdef Py_ssize_t diff = la - lb if la >= lb else lb - la
    cdef long w = window
    if w >= 0 and w < diff:
        w = diff
    cdef cnp.ndarray[cnp.float64_t, ndim=1] prev_arr = np.full(lb, INF)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] cur_arr = np.full(lb, INF)
    cdef double[::1] prev = prev_arr
    cdef double[::1] cur = cur_arr
    cdef double[::1] tmp
    cdef Py_ssize_t i, j, lo, hi
    cdef double ai, cost, best
    with nogil:
        for i in range(la):
            if w < 0:
                lo = 0
                hi = lb
            else:
                lo = i - w if i - w > 0 else 0
                hi = i + w + 1 if i + w + 1 < lb else lb
            ai = a[i]
            for j in range(lo, hi):
                cost = fabs(ai - b[j])
                if i == 0 and j == 0:
                    cur[j] = cost
                    continue
                best = INF
                if i > 0 and prev[j] < best:
                    best = prev[j]
                if j > 0 and cur[j - 1] < best:
                    best = cur[j - 1]
                if i > 0 and j > 0 and prev[j - 1] < best:
                    best = prev[j - 1]
                cur[j] = cost + best
            tmp = prev
            prev = cur
            cur = tmp
            for j in range(lb):
                cur[j] = INF
    return prev[lb - 1]


def conv1d_forward(double[:, ::1] x, double[:, ::1] weights, double[::1] bias):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t T = x.shape[1]
    cdef Py_ssize_t c = weights.shape[0]
    cdef Py_ssize_t ks = weights.shape[1]
    cdef Py_ssize_t L = T - ks + 1
    cdef cnp.ndarray[cnp.float64_t, ndim=3] out_arr = np.empty((n, c, L))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t v, ch, t, k
    cdef double acc
    with nogil:
        for v in range(n):
            for ch in range(c):
                for t in range(L):
                    acc = bias[ch]
                    for k in range(ks):
                        acc += x[v, t + k] * weights[ch, k]
                    out[v, ch, t] = acc
    return out_arr


def conv1d_grad_input(double[:, :, ::1] grad_out, double[:, ::1] weights,
                      Py_ssize_t series_length):
    cdef Py_ssize_t n = grad_out.shape[0]
    cdef Py_ssize_t c = grad_out.shape[1]
    cdef Py_ssize_t L = grad_out.shape[2]
    cdef Py_ssize_t ks = weights.shape[1]
    if L + ks - 1 != series_length:
        raise ValueError(
            f"inconsistent shapes: expected T={series_length}, got {L + ks - 1}"
        )
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gx_arr = np.zeros((n, series_length))
    cdef double[:, ::1] gx = gx_arr
    cdef Py_ssize_t v, ch, t, k
    cdef double g
    with nogil:
        for v in range(n):
            for ch in range(c):
                for t in range(L):
                    g = grad_out[v, ch, t]
                    for k in range(ks):
                        gx[v, t + k] += g * weights[ch, k]
    return gx_arr


def conv1d_grad_weights(double[:, :, ::1] grad_out, double[:, ::1] x,
                        Py_ssize_t kernel_size):
    cdef Py_ssize_t n = grad_out.shape[0]
    cdef Py_ssize_t c = grad_out.shape[1]
    cdef Py_ssize_t L = grad_out.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gw_arr = np.zeros((c, kernel_size))
    cdef double[:, ::1] gw = gw_arr
    cdef Py_ssize_t v, ch, t, k
    cdef double g
    with nogil:
        for v in range(n):
            for ch in range(c):
                for t in range(L):
                    g = grad_out[v, ch, t]
                    for k in range(kernel_size):
                        gw[ch, k] += g * x[v, t + k]
    return gw_arr


def conv1d_grad_bias(double[:, :, ::1] grad_out):
    cdef Py_ssize_t n = grad_out.shape[0]
    cdef Py_ssize_t c = grad_out.shape[1]
    cdef Py_ssize_t L = grad_out.shape[2]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gb_arr = np.zeros(c)
    cdef double[::1] gb = gb_arr
    cdef Py_ssize_t v, ch, t
    with nogil:
        for v in range(n):
            for ch in range(c):
                for t in range(L):
                    gb[ch] += grad_out[v, ch, t]
    return gb_arr

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled convolution kernels (NCHW, float32/float64 in, float64 accumulation).

Loops are organized per kernel tap so the innermost loop runs unit-stride
over output columns with no boundary branches.
"""

import numpy as np

cimport cython
cimport numpy as cnp

ctypedef fused floating:
    float
    double

BACKEND_NAME = "cython"


cdef inline void _tap_bounds(Py_ssize_t k_off, int stride, int pad, Py_ssize_t in_dim,
                             Py_ssize_t out_dim, Py_ssize_t* lo, Py_ssize_t* hi) nogil:
    # output positions p with 0 <= p*stride + k_off - pad < in_dim
    cdef Py_ssize_t base = k_off - pad
    cdef Py_ssize_t start = 0
    if base < 0:
        start = (-base + stride - 1) // stride
    cdef Py_ssize_t stop = out_dim
    # p*stride + base <= in_dim - 1
    cdef Py_ssize_t limit = (in_dim - 1 - base) // stride + 1
    if limit < stop:
        stop = limit
    if stop < start:
        stop = start
    lo[0] = start
    hi[0] = stop


def conv2d_forward(floating[:, :, :, ::1] x, floating[:, :, :, ::1] w, int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wid = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t oh = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t ow = (wid + 2 * pad - kw) // stride + 1
    acc_arr = np.zeros((n, cout, oh, ow), dtype=np.float64)
    cdef double[:, :, :, ::1] acc = acc_arr
    cdef Py_ssize_t b, co, ci, i, j, p, q, ih, iw0, plo, phi, qlo, qhi
    cdef double wv
    for b in range(n):
        for ci in range(cin):
            for i in range(kh):
                _tap_bounds(i, stride, pad, h, oh, &plo, &phi)
                for j in range(kw):
                    _tap_bounds(j, stride, pad, wid, ow, &qlo, &qhi)
                    for co in range(cout):
                        wv = <double>w[co, ci, i, j]
                        for p in range(plo, phi):
                            ih = p * stride + i - pad
                            iw0 = j - pad
                            for q in range(qlo, qhi):
                                acc[b, co, p, q] += wv * <double>x[b, ci, ih, iw0 + q * stride]
    if floating is float:
        return acc_arr.astype(np.float32)
    return acc_arr


def conv2d_backward_input(floating[:, :, :, ::1] dy, floating[:, :, :, ::1] w,
                          int stride, int pad, Py_ssize_t h, Py_ssize_t wid):
    cdef Py_ssize_t n = dy.shape[0], cout = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    cdef Py_ssize_t cin = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    acc_arr = np.zeros((n, cin, h, wid), dtype=np.float64)
    cdef double[:, :, :, ::1] acc = acc_arr
    cdef Py_ssize_t b, co, ci, i, j, p, q, ih, iw0, plo, phi, qlo, qhi
    cdef double wv
    for b in range(n):
        for ci in range(cin):
            for i in range(kh):
                _tap_bounds(i, stride, pad, h, oh, &plo, &phi)
                for j in range(kw):
                    _tap_bounds(j, stride, pad, wid, ow, &qlo, &qhi)
                    for co in range(cout):
                        wv = <double>w[co, ci, i, j]
                        for p in range(plo, phi):
                            ih = p * stride + i - pad
                            iw0 = j - pad
                            for q in range(qlo, qhi):
                                acc[b, ci, ih, iw0 + q * stride] += wv * <double>dy[b, co, p, q]
    if floating is float:
        return acc_arr.astype(np.float32)
    return acc_arr


def conv2d_backward_weight(floating[:, :, :, ::1] dy, floating[:, :, :, ::1] x,
                           int stride, int pad, Py_ssize_t kh, Py_ssize_t kw):
    cdef Py_ssize_t n = dy.shape[0], cout = dy.shape[1], oh = dy.shape[2], ow = dy.shape[3]
    cdef Py_ssize_t cin = x.shape[1], h = x.shape[2], wid = x.shape[3]
    acc_arr = np.zeros((cout, cin, kh, kw), dtype=np.float64)
    cdef double[:, :, :, ::1] acc = acc_arr
    cdef Py_ssize_t b, co, ci, i, j, p, q, ih, iw0, plo, phi, qlo, qhi
    cdef double s
    for b in range(n):
        for ci in range(cin):
            for i in range(kh):
                _tap_bounds(i, stride, pad, h, oh, &plo, &phi)
                for j in range(kw):
                    _tap_bounds(j, stride, pad, wid, ow, &qlo, &qhi)
                    for co in range(cout):
                        s = 0.0
                        for p in range(plo, phi):
                            ih = p * stride + i - pad
                            iw0 = j - pad
                            for q in range(qlo, qhi):
                                s += <double>dy[b, co, p, q] * <double>x[b, ci, ih, iw0 + q * stride]
                        acc[co, ci, i, j] += s
    if floating is float:
        return acc_arr.astype(np.float32)
    return acc_arr

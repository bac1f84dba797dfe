# Compiled convolution kernels. Same contracts as _kernels_np. Each output
# (or input-gradient) row is accumulated in an L1-resident buffer while the
# reduction loops run, so the innermost loop is a contiguous-destination
# multiply-add the C compiler can vectorize.

import numpy as np

cimport numpy as cnp
from libc.stdlib cimport free, malloc
from libc.string cimport memset

cnp.import_array()

ctypedef cnp.float64_t f64


cdef inline Py_ssize_t imax(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a > b else b


cdef inline Py_ssize_t imin(Py_ssize_t a, Py_ssize_t b) nogil:
    return a if a < b else b


cdef inline Py_ssize_t ceil_div(Py_ssize_t a, Py_ssize_t b) nogil:
    if a <= 0:
        return 0
    return (a + b - 1) // b


def conv2d_forward(cnp.ndarray x_arr, cnp.ndarray w_arr, Py_ssize_t stride, Py_ssize_t pad):
    cdef f64[:, :, :, ::1] x = np.ascontiguousarray(x_arr)
    cdef f64[:, :, :, ::1] w = np.ascontiguousarray(w_arr)
    cdef Py_ssize_t n = x.shape[0], ci = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t ho = (h + 2 * pad - k) // stride + 1
    cdef Py_ssize_t wo = (wd + 2 * pad - k) // stride + 1
    out_arr = np.zeros((n, co, ho, wo), dtype=np.float64)
    cdef f64[:, :, :, ::1] out = out_arr
    cdef f64 *buf = <f64 *> malloc(wo * sizeof(f64))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t b, o, c, ki, kj, i, j, hi, jlo, jhi, base
    cdef f64 wv
    cdef const f64 *xrow
    try:
        with nogil:
            for b in range(n):
                for o in range(co):
                    for i in range(ho):
                        memset(buf, 0, wo * sizeof(f64))
                        for c in range(ci):
                            for ki in range(k):
                                hi = i * stride + ki - pad
                                if hi < 0 or hi >= h:
                                    continue
                                xrow = &x[b, c, hi, 0]
                                for kj in range(k):
                                    wv = w[o, c, ki, kj]
                                    jlo = imax(0, ceil_div(pad - kj, stride))
                                    jhi = imin(wo - 1, (wd - 1 + pad - kj) // stride)
                                    base = kj - pad
                                    if stride == 1:
                                        for j in range(jlo, jhi + 1):
                                            buf[j] += wv * xrow[j + base]
                                    else:
                                        for j in range(jlo, jhi + 1):
                                            buf[j] += wv * xrow[j * stride + base]
                        for j in range(wo):
                            out[b, o, i, j] = buf[j]
    finally:
        free(buf)
    return out_arr


def conv2d_backward_input(cnp.ndarray gy_arr, cnp.ndarray w_arr, Py_ssize_t stride, Py_ssize_t pad,
                          Py_ssize_t h, Py_ssize_t wd):
    cdef f64[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr)
    cdef f64[:, :, :, ::1] w = np.ascontiguousarray(w_arr)
    cdef Py_ssize_t n = gy.shape[0], co = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t ci = w.shape[1], k = w.shape[2]
    gx_arr = np.zeros((n, ci, h, wd), dtype=np.float64)
    cdef f64[:, :, :, ::1] gx = gx_arr
    cdef f64 *buf = <f64 *> malloc(wd * sizeof(f64))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t b, o, c, ki, kj, i, j, hi, jlo, jhi, base
    cdef f64 wv
    cdef const f64 *gyrow
    try:
        with nogil:
            for b in range(n):
                for c in range(ci):
                    for hi in range(h):
                        memset(buf, 0, wd * sizeof(f64))
                        for o in range(co):
                            for ki in range(k):
                                # gy row i feeds gx row hi iff hi == i*stride + ki - pad
                                if (hi + pad - ki) % stride != 0:
                                    continue
                                i = (hi + pad - ki) // stride
                                if i < 0 or i >= ho:
                                    continue
                                gyrow = &gy[b, o, i, 0]
                                for kj in range(k):
                                    wv = w[o, c, ki, kj]
                                    jlo = imax(0, ceil_div(pad - kj, stride))
                                    jhi = imin(wo - 1, (wd - 1 + pad - kj) // stride)
                                    base = kj - pad
                                    for j in range(jlo, jhi + 1):
                                        buf[j * stride + base] += wv * gyrow[j]
                        for j in range(wd):
                            gx[b, c, hi, j] = buf[j]
    finally:
        free(buf)
    return gx_arr


def conv2d_backward_kernel(cnp.ndarray gy_arr, cnp.ndarray x_arr, Py_ssize_t stride, Py_ssize_t pad,
                           Py_ssize_t k):
    cdef f64[:, :, :, ::1] gy = np.ascontiguousarray(gy_arr)
    cdef f64[:, :, :, ::1] x = np.ascontiguousarray(x_arr)
    cdef Py_ssize_t n = x.shape[0], ci = x.shape[1], h = x.shape[2], wd = x.shape[3]
    cdef Py_ssize_t co = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    gw_arr = np.zeros((co, ci, k, k), dtype=np.float64)
    cdef f64[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, o, c, ki, kj, i, j, hi, ilo, ihi, jlo, jhi, base
    cdef f64 acc
    cdef const f64 *xrow
    cdef const f64 *gyrow
    with nogil:
        for o in range(co):
            for c in range(ci):
                for ki in range(k):
                    ilo = imax(0, ceil_div(pad - ki, stride))
                    ihi = imin(ho - 1, (h - 1 + pad - ki) // stride)
                    for kj in range(k):
                        jlo = imax(0, ceil_div(pad - kj, stride))
                        jhi = imin(wo - 1, (wd - 1 + pad - kj) // stride)
                        base = kj - pad
                        acc = 0.0
                        for b in range(n):
                            for i in range(ilo, ihi + 1):
                                hi = i * stride + ki - pad
                                xrow = &x[b, c, hi, 0]
                                gyrow = &gy[b, o, i, 0]
                                for j in range(jlo, jhi + 1):
                                    acc += xrow[j * stride + base] * gyrow[j]
                        gw[o, c, ki, kj] = acc
    return gw_arr


def conv1d_forward(cnp.ndarray x_arr, cnp.ndarray w_arr, Py_ssize_t stride):
    cdef f64[:, :, ::1] x = np.ascontiguousarray(x_arr)
    cdef f64[:, :, ::1] w = np.ascontiguousarray(w_arr)
    cdef Py_ssize_t n = x.shape[0], ci = x.shape[1], ln = x.shape[2]
    cdef Py_ssize_t co = w.shape[0], k = w.shape[2]
    cdef Py_ssize_t lo = (ln - k) // stride + 1
    out_arr = np.zeros((n, co, lo), dtype=np.float64)
    cdef f64[:, :, ::1] out = out_arr
    cdef Py_ssize_t b, o, c, ki, i
    cdef f64 wv
    cdef const f64 *xrow
    with nogil:
        for b in range(n):
            for o in range(co):
                for c in range(ci):
                    xrow = &x[b, c, 0]
                    for ki in range(k):
                        wv = w[o, c, ki]
                        for i in range(lo):
                            out[b, o, i] += wv * xrow[i * stride + ki]
    return out_arr


def conv1d_backward_input(cnp.ndarray gy_arr, cnp.ndarray w_arr, Py_ssize_t stride, Py_ssize_t ln):
    cdef f64[:, :, ::1] gy = np.ascontiguousarray(gy_arr)
    cdef f64[:, :, ::1] w = np.ascontiguousarray(w_arr)
    cdef Py_ssize_t n = gy.shape[0], co = gy.shape[1], lo = gy.shape[2]
    cdef Py_ssize_t ci = w.shape[1], k = w.shape[2]
    gx_arr = np.zeros((n, ci, ln), dtype=np.float64)
    cdef f64[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t b, o, c, ki, i
    cdef f64 wv
    with nogil:
        for b in range(n):
            for o in range(co):
                for c in range(ci):
                    for ki in range(k):
                        wv = w[o, c, ki]
                        for i in range(lo):
                            gx[b, c, i * stride + ki] += wv * gy[b, o, i]
    return gx_arr


def conv1d_backward_kernel(cnp.ndarray gy_arr, cnp.ndarray x_arr, Py_ssize_t stride, Py_ssize_t k):
    cdef f64[:, :, ::1] gy = np.ascontiguousarray(gy_arr)
    cdef f64[:, :, ::1] x = np.ascontiguousarray(x_arr)
    cdef Py_ssize_t n = x.shape[0], ci = x.shape[1]
    cdef Py_ssize_t co = gy.shape[1], lo = gy.shape[2]
    gw_arr = np.zeros((co, ci, k), dtype=np.float64)
    cdef f64[:, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, o, c, ki, i
    cdef f64 acc
    with nogil:
        for o in range(co):
            for c in range(ci):
                for ki in range(k):
                    acc = 0.0
                    for b in range(n):
                        for i in range(lo):
                            acc += x[b, c, i * stride + ki] * gy[b, o, i]
                    gw[o, c, ki] = acc
    return gw_arr

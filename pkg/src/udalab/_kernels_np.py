"""Pure-numpy convolution kernels (fallback backend).

Forward and backward passes are expressed as im2col gathers plus batched
matmuls so the heavy lifting lands in BLAS. Shapes follow the usual
convention: x [N,Ci,H,W], w [Co,Ci,k,k], y [N,Co,Ho,Wo].
"""

import numpy as np


def _im2col(xp, k, stride, ho, wo):
    n, ci, _, _ = xp.shape
    cols = np.empty((n, ci, k, k, ho, wo), dtype=xp.dtype)
    for ki in range(k):
        for kj in range(k):
            cols[:, :, ki, kj] = xp[:, :, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride]
    return cols.reshape(n, ci * k * k, ho * wo)


def conv2d_forward(x, w, stride, pad):
    n, ci, h, wd = x.shape
    co, _, k, _ = w.shape
    ho = (h + 2 * pad - k) // stride + 1
    wo = (wd + 2 * pad - k) // stride + 1
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _im2col(xp, k, stride, ho, wo)
    y = np.matmul(w.reshape(co, ci * k * k), cols)
    return y.reshape(n, co, ho, wo)


def conv2d_backward_input(gy, w, stride, pad, h, wd):
    n, co, ho, wo = gy.shape
    _, ci, k, _ = w.shape
    gcols = np.matmul(w.reshape(co, ci * k * k).T, gy.reshape(n, co, ho * wo))
    g6 = gcols.reshape(n, ci, k, k, ho, wo)
    gxp = np.zeros((n, ci, h + 2 * pad, wd + 2 * pad), dtype=gy.dtype)
    for ki in range(k):
        for kj in range(k):
            gxp[:, :, ki : ki + stride * ho : stride, kj : kj + stride * wo : stride] += g6[:, :, ki, kj]
    if pad:
        return gxp[:, :, pad : pad + h, pad : pad + wd]
    return gxp


def conv2d_backward_kernel(gy, x, stride, pad, k):
    n, ci, h, wd = x.shape
    _, co, ho, wo = gy.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad))) if pad else x
    cols = _im2col(xp, k, stride, ho, wo)
    gw = np.matmul(gy.reshape(n, co, ho * wo), cols.transpose(0, 2, 1)).sum(axis=0)
    return gw.reshape(co, ci, k, k)


def conv1d_forward(x, w, stride):
    n, ci, ln = x.shape
    co, _, k = w.shape
    lo = (ln - k) // stride + 1
    cols = np.empty((n, ci, k, lo), dtype=x.dtype)
    for ki in range(k):
        cols[:, :, ki] = x[:, :, ki : ki + stride * lo : stride]
    y = np.matmul(w.reshape(co, ci * k), cols.reshape(n, ci * k, lo))
    return y.reshape(n, co, lo)


def conv1d_backward_input(gy, w, stride, ln):
    n, co, lo = gy.shape
    _, ci, k = w.shape
    gcols = np.matmul(w.reshape(co, ci * k).T, gy.reshape(n, co, lo)).reshape(n, ci, k, lo)
    gx = np.zeros((n, ci, ln), dtype=gy.dtype)
    for ki in range(k):
        gx[:, :, ki : ki + stride * lo : stride] += gcols[:, :, ki]
    return gx


def conv1d_backward_kernel(gy, x, stride, k):
    n, ci, ln = x.shape
    _, co, lo = gy.shape
    cols = np.empty((n, ci, k, lo), dtype=x.dtype)
    for ki in range(k):
        cols[:, :, ki] = x[:, :, ki : ki + stride * lo : stride]
    gw = np.matmul(gy.reshape(n, co, lo), cols.reshape(n, ci * k, lo).transpose(0, 2, 1)).sum(axis=0)
    return gw.reshape(co, ci, k)

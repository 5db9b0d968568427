# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bilinear gather/scatter kernels (same contract as _bilinear_py)."""
import numpy as np

cimport numpy as cnp
from libc.math cimport floor

ctypedef fused real:
    float
    double


def bilinear_gather(src, xs, ys):
    src = np.ascontiguousarray(src)
    out_shape = xs.shape
    xs64 = np.ascontiguousarray(xs, dtype=np.float64).ravel()
    ys64 = np.ascontiguousarray(ys, dtype=np.float64).ravel()
    out = np.zeros((xs64.size, src.shape[2]), dtype=src.dtype)
    if src.dtype == np.float32:
        _gather[float](src, xs64, ys64, out)
    elif src.dtype == np.float64:
        _gather[double](src, xs64, ys64, out)
    else:
        raise TypeError(f"unsupported dtype {src.dtype}")
    return out.reshape(out_shape + (src.shape[2],))


def bilinear_scatter(grad_out, xs, ys, height, width):
    grad_out = np.ascontiguousarray(grad_out)
    c = grad_out.shape[grad_out.ndim - 1]
    g = grad_out.reshape(-1, c)
    xs64 = np.ascontiguousarray(xs, dtype=np.float64).ravel()
    ys64 = np.ascontiguousarray(ys, dtype=np.float64).ravel()
    acc = np.zeros((height, width, c), dtype=grad_out.dtype)
    if grad_out.dtype == np.float32:
        _scatter[float](g, xs64, ys64, acc)
    elif grad_out.dtype == np.float64:
        _scatter[double](g, xs64, ys64, acc)
    else:
        raise TypeError(f"unsupported dtype {grad_out.dtype}")
    return acc


cdef void _gather(real[:, :, ::1] src, double[::1] xs, double[::1] ys,
                  real[:, ::1] out) noexcept:
    cdef Py_ssize_t h = src.shape[0]
    cdef Py_ssize_t w = src.shape[1]
    cdef Py_ssize_t c = src.shape[2]
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, k, x0, y0, x1, y1
    cdef double fx, fy, w00, w01, w10, w11
    for i in range(n):
        x0 = <Py_ssize_t>floor(xs[i])
        y0 = <Py_ssize_t>floor(ys[i])
        fx = xs[i] - x0
        fy = ys[i] - y0
        x1 = x0 + 1
        y1 = y0 + 1
        w00 = (1.0 - fx) * (1.0 - fy)
        w10 = fx * (1.0 - fy)
        w01 = (1.0 - fx) * fy
        w11 = fx * fy
        for k in range(c):
            out[i, k] = 0
        if 0 <= y0 < h:
            if 0 <= x0 < w:
                for k in range(c):
                    out[i, k] += <real>w00 * src[y0, x0, k]
            if 0 <= x1 < w:
                for k in range(c):
                    out[i, k] += <real>w10 * src[y0, x1, k]
        if 0 <= y1 < h:
            if 0 <= x0 < w:
                for k in range(c):
                    out[i, k] += <real>w01 * src[y1, x0, k]
            if 0 <= x1 < w:
                for k in range(c):
                    out[i, k] += <real>w11 * src[y1, x1, k]


cdef void _scatter(real[:, ::1] g, double[::1] xs, double[::1] ys,
                   real[:, :, ::1] acc) noexcept:
    cdef Py_ssize_t h = acc.shape[0]
    cdef Py_ssize_t w = acc.shape[1]
    cdef Py_ssize_t c = acc.shape[2]
    cdef Py_ssize_t n = xs.shape[0]
    cdef Py_ssize_t i, k, x0, y0, x1, y1
    cdef double fx, fy, w00, w01, w10, w11
    for i in range(n):
        x0 = <Py_ssize_t>floor(xs[i])
        y0 = <Py_ssize_t>floor(ys[i])
        fx = xs[i] - x0
        fy = ys[i] - y0
        x1 = x0 + 1
        y1 = y0 + 1
        w00 = (1.0 - fx) * (1.0 - fy)
        w10 = fx * (1.0 - fy)
        w01 = (1.0 - fx) * fy
        w11 = fx * fy
        if 0 <= y0 < h:
            if 0 <= x0 < w:
                for k in range(c):
                    acc[y0, x0, k] += <real>w00 * g[i, k]
            if 0 <= x1 < w:
                for k in range(c):
                    acc[y0, x1, k] += <real>w10 * g[i, k]
        if 0 <= y1 < h:
            if 0 <= x0 < w:
                for k in range(c):
                    acc[y1, x0, k] += <real>w01 * g[i, k]
            if 0 <= x1 < w:
                for k in range(c):
                    acc[y1, x1, k] += <real>w11 * g[i, k]

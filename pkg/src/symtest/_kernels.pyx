# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``symtest._kernels_py``."""
import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


cdef void _apply_mode(const cplx[:, :] u, Py_ssize_t d, Py_ssize_t size,
                      Py_ssize_t stride, const cplx* src, cplx* dst) noexcept nogil:
    cdef Py_ssize_t block = d * stride
    cdef Py_ssize_t outer, inner, a, b, base
    cdef cplx acc
    for outer in range(size // block):
        for inner in range(stride):
            base = outer * block + inner
            for a in range(d):
                acc = 0
                for b in range(d):
                    acc = acc + u[a, b] * src[base + b * stride]
                dst[base + a * stride] = acc


cdef void _apply_power(const cplx[:, :] u, Py_ssize_t d, Py_ssize_t m, Py_ssize_t size,
                       cplx* buf0, cplx* buf1) noexcept nogil:
    # result ends in buf0
    cdef Py_ssize_t k, stride
    cdef cplx* tmp
    stride = size
    for k in range(m):
        stride = stride // d
        _apply_mode(u, d, size, stride, buf0, buf1)
        tmp = buf0
        buf0 = buf1
        buf1 = tmp
    if m % 2 == 1:
        for k in range(size):
            buf1[k] = buf0[k]


def apply_power(u, Py_ssize_t m, psi):
    cdef const cplx[:, ::1] uu = np.ascontiguousarray(u, dtype=complex)
    arr = np.asarray(psi, dtype=complex)
    shape = arr.shape
    cdef Py_ssize_t d = uu.shape[0]
    cdef Py_ssize_t size = d ** m
    cols = np.array(arr.reshape(size, -1).T, order="C", copy=True)
    cdef cplx[:, ::1] c = cols
    cdef cplx[::1] buf = np.empty(size, dtype=complex)
    cdef Py_ssize_t j
    with nogil:
        for j in range(c.shape[0]):
            _apply_power(uu, d, m, size, &c[j, 0], &buf[0])
    return np.ascontiguousarray(cols.T).reshape(shape)


def apply_power_batch(us, Py_ssize_t m, psi):
    cdef const cplx[:, :, ::1] uu = np.ascontiguousarray(us, dtype=complex)
    cdef const cplx[::1] p = np.ascontiguousarray(psi, dtype=complex).ravel()
    cdef Py_ssize_t n = uu.shape[0]
    cdef Py_ssize_t d = uu.shape[1]
    cdef Py_ssize_t size = d ** m
    out = np.empty((n, size), dtype=complex)
    cdef cplx[:, ::1] o = out
    cdef cplx[::1] buf = np.empty(size, dtype=complex)
    cdef Py_ssize_t q, i
    with nogil:
        for q in range(n):
            for i in range(size):
                o[q, i] = p[i]
            _apply_power(uu[q], d, m, size, &o[q, 0], &buf[0])
    return out


def expectations(us, Py_ssize_t m, psi):
    cdef const cplx[:, :, ::1] uu = np.ascontiguousarray(us, dtype=complex)
    cdef const cplx[::1] p = np.ascontiguousarray(psi, dtype=complex).ravel()
    cdef Py_ssize_t n = uu.shape[0]
    cdef Py_ssize_t d = uu.shape[1]
    cdef Py_ssize_t size = d ** m
    out = np.empty(n, dtype=complex)
    cdef cplx[::1] o = out
    cdef cplx[::1] work = np.empty(size, dtype=complex)
    cdef cplx[::1] buf = np.empty(size, dtype=complex)
    cdef Py_ssize_t q, i
    cdef cplx acc
    with nogil:
        for q in range(n):
            for i in range(size):
                work[i] = p[i]
            _apply_power(uu[q], d, m, size, &work[0], &buf[0])
            acc = 0
            for i in range(size):
                acc = acc + p[i].conjugate() * work[i]
            o[q] = acc
    return out


cdef void _kron_step(const cplx* a, Py_ssize_t k, const cplx[:, :] u, Py_ssize_t d,
                     cplx* out) noexcept nogil:
    # out = a (x) u, a is k x k, out is (k d) x (k d)
    cdef Py_ssize_t r, s, c, e, kd = k * d
    cdef cplx x
    for r in range(k):
        for s in range(k):
            x = a[r * k + s]
            for c in range(d):
                for e in range(d):
                    out[(r * d + c) * kd + s * d + e] = x * u[c, e]


def tensor_power_batch(us, Py_ssize_t m):
    cdef const cplx[:, :, ::1] uu = np.ascontiguousarray(us, dtype=complex)
    cdef Py_ssize_t n = uu.shape[0]
    cdef Py_ssize_t d = uu.shape[1]
    cdef Py_ssize_t size = d ** m
    out = np.empty((n, size, size), dtype=complex)
    cdef cplx[:, :, ::1] o = out
    cdef cplx[::1] b0 = np.empty(size * size, dtype=complex)
    cdef cplx[::1] b1 = np.empty(size * size, dtype=complex)
    cdef cplx* src
    cdef cplx* dst
    cdef cplx* tmp
    cdef Py_ssize_t q, step, k, i
    with nogil:
        for q in range(n):
            # ping-pong so the last step writes straight into the output
            src = &b0[0] if m % 2 == 0 else &b1[0]
            dst = &b1[0] if m % 2 == 0 else &b0[0]
            src[0] = 1
            k = 1
            for step in range(m):
                if step == m - 1:
                    dst = &o[q, 0, 0]
                _kron_step(src, k, uu[q], d, dst)
                k = k * d
                tmp = src
                src = dst
                dst = tmp
    return out

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled contraction kernels for the TT-to-CP sweep.

The dominant core-times-matrix product goes to BLAS gemm; the Hadamard-type
reductions over the remaining index run as plain C loops, so no temporary
larger than ``a * i * r`` is created. Each kernel is specialized for double
and double complex through a fused type; callers pass C-contiguous arrays of
one common dtype.
"""
import numpy as np

from scipy.linalg.cython_blas cimport dgemm, zgemm

ctypedef fused scalar:
    double
    double complex


cdef inline scalar _conj(scalar x) noexcept nogil:
    if scalar is double:
        return x
    else:
        return x.conjugate()


cdef void _gemm(char *ta, char *tb, int m, int n, int k,
                scalar *a, int lda, scalar *b, int ldb, scalar *c, int ldc) noexcept nogil:
    """Column-major ``C = op(A) op(B)``."""
    cdef double one_d = 1.0, zero_d = 0.0
    cdef double complex one_z = 1.0, zero_z = 0.0
    if scalar is double:
        dgemm(ta, tb, &m, &n, &k, &one_d, a, &lda, b, &ldb, &zero_d, c, &ldc)
    else:
        zgemm(ta, tb, &m, &n, &k, &one_z, a, &lda, b, &ldb, &zero_z, c, &ldc)


cdef _core_times(scalar[:, :, ::1] core, scalar[:, ::1] mat, scalar[:, ::1] out):
    """out[(a, i), r] = sum_b core[a, i, b] * mat[b, r] (row-major views)."""
    cdef int ai = core.shape[0] * core.shape[1], nb = core.shape[2], nr = mat.shape[1]
    if ai == 0 or nr == 0:
        return
    if nb == 0:
        out[:, :] = 0
        return
    # row-major X(p, q) is column-major X^T(q, p): out^T = mat^T core^T
    with nogil:
        _gemm(b"N", b"N", nr, ai, nb, &mat[0, 0], nr, &core[0, 0, 0], nb, &out[0, 0], nr)


def psi_right_step(scalar[:, :, ::1] core, scalar[:, ::1] factor, scalar[:, ::1] psi):
    """out[a, r] = sum_{i, b} core[a, i, b] * conj(factor[i, r]) * psi[b, r]"""
    cdef Py_ssize_t na = core.shape[0], ni = core.shape[1], nb = core.shape[2]
    cdef Py_ssize_t nr = factor.shape[1]
    cdef Py_ssize_t a, i, r
    if factor.shape[0] != ni or psi.shape[0] != nb or psi.shape[1] != nr:
        raise ValueError("psi_right_step: shape mismatch")
    dtype = np.float64 if scalar is double else np.complex128
    t_arr = np.empty((na * ni, nr), dtype=dtype)
    out_arr = np.zeros((na, nr), dtype=dtype)
    cdef scalar[:, ::1] t = t_arr
    cdef scalar[:, ::1] out = out_arr
    _core_times(core, psi, t)
    with nogil:
        for a in range(na):
            for i in range(ni):
                for r in range(nr):
                    out[a, r] = out[a, r] + t[a * ni + i, r] * _conj(factor[i, r])
    return out_arr


def psi_left_step(scalar[:, :, ::1] core, scalar[:, ::1] factor, scalar[:, ::1] psi):
    """out[b, r] = sum_{a, i} core[a, i, b] * conj(factor[i, r]) * psi[a, r]"""
    cdef Py_ssize_t na = core.shape[0], ni = core.shape[1], nb = core.shape[2]
    cdef Py_ssize_t nr = factor.shape[1]
    cdef Py_ssize_t a, i, r
    if factor.shape[0] != ni or psi.shape[0] != na or psi.shape[1] != nr:
        raise ValueError("psi_left_step: shape mismatch")
    dtype = np.float64 if scalar is double else np.complex128
    w_arr = np.empty((na * ni, nr), dtype=dtype)
    out_arr = np.zeros((nb, nr), dtype=dtype)
    cdef scalar[:, ::1] w = w_arr
    cdef scalar[:, ::1] out = out_arr
    cdef int ai = na * ni, inb = nb, inr = nr
    with nogil:
        for a in range(na):
            for i in range(ni):
                for r in range(nr):
                    w[a * ni + i, r] = psi[a, r] * _conj(factor[i, r])
        # out^T(r, b) = w^T(r, ai) core(ai, b)
        if ai > 0 and nb > 0 and nr > 0:
            _gemm(b"N", b"T", inr, inb, ai, &w[0, 0], inr, &core[0, 0, 0], inb, &out[0, 0], inr)
    return out_arr


def core_mttkrp(scalar[:, :, ::1] core, scalar[:, ::1] psi_left, scalar[:, ::1] psi_right):
    """out[i, r] = sum_{a, b} core[a, i, b] * psi_left[a, r] * psi_right[b, r]"""
    cdef Py_ssize_t na = core.shape[0], ni = core.shape[1], nb = core.shape[2]
    cdef Py_ssize_t nr = psi_left.shape[1]
    cdef Py_ssize_t a, i, r
    if psi_left.shape[0] != na or psi_right.shape[0] != nb or psi_right.shape[1] != nr:
        raise ValueError("core_mttkrp: shape mismatch")
    dtype = np.float64 if scalar is double else np.complex128
    t_arr = np.empty((na * ni, nr), dtype=dtype)
    out_arr = np.zeros((ni, nr), dtype=dtype)
    cdef scalar[:, ::1] t = t_arr
    cdef scalar[:, ::1] out = out_arr
    _core_times(core, psi_right, t)
    with nogil:
        for a in range(na):
            for i in range(ni):
                for r in range(nr):
                    out[i, r] = out[i, r] + t[a * ni + i, r] * psi_left[a, r]
    return out_arr

# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled Toda residual and Jacobian-vector product (same contract as ``_toda_py``)."""

import numpy as np
from libc.math cimport exp


cdef inline Py_ssize_t _wrap(Py_ssize_t k, Py_ssize_t m) noexcept nogil:
    if k < 0:
        return k + m
    if k >= m:
        return k - m
    return k


def toda_residual(double[:, :, ::1] u, double[:, :, ::1] ga, double[:, :, ::1] wk,
                  double inv_hx2, double inv_hy2, bint periodic):
    cdef Py_ssize_t n = u.shape[0], ny = u.shape[1], nx = u.shape[2]
    r_arr = np.zeros((n, ny, nx))
    e_arr = np.empty((n, ny, nx))
    cdef double[:, :, ::1] r = r_arr
    cdef double[:, :, ::1] e = e_arr
    cdef Py_ssize_t k, kp, km, j, i, j0, j1, i0, i1
    cdef double c, lap
    with nogil:
        for k in range(n):
            kp = _wrap(k + 1, n)
            for j in range(ny):
                for i in range(nx):
                    e[k, j, i] = ga[k, j, i] * exp(u[kp, j, i] - u[k, j, i])
        if periodic:
            j0, j1, i0, i1 = 0, ny, 0, nx
        else:
            j0, j1, i0, i1 = 1, ny - 1, 1, nx - 1
        for k in range(n):
            km = _wrap(k - 1, n)
            for j in range(j0, j1):
                for i in range(i0, i1):
                    c = u[k, j, i]
                    lap = inv_hx2 * (u[k, j, _wrap(i - 1, nx)] - 2.0 * c + u[k, j, _wrap(i + 1, nx)])
                    lap = lap + inv_hy2 * (u[k, _wrap(j - 1, ny), i] - 2.0 * c + u[k, _wrap(j + 1, ny), i])
                    r[k, j, i] = 0.25 * lap - wk[k, j, i] + e[k, j, i] - e[km, j, i]
    return r_arr, e_arr


def toda_jvp(double[:, :, ::1] e, double[:, :, ::1] v,
             double inv_hx2, double inv_hy2, bint periodic):
    cdef Py_ssize_t n = v.shape[0], ny = v.shape[1], nx = v.shape[2]
    out_arr = np.zeros((n, ny, nx))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t k, kp, km, j, i, j0, j1, i0, i1
    cdef double c, lap
    with nogil:
        if periodic:
            j0, j1, i0, i1 = 0, ny, 0, nx
        else:
            j0, j1, i0, i1 = 1, ny - 1, 1, nx - 1
        for k in range(n):
            kp = _wrap(k + 1, n)
            km = _wrap(k - 1, n)
            for j in range(j0, j1):
                for i in range(i0, i1):
                    c = v[k, j, i]
                    lap = inv_hx2 * (v[k, j, _wrap(i - 1, nx)] - 2.0 * c + v[k, j, _wrap(i + 1, nx)])
                    lap = lap + inv_hy2 * (v[k, _wrap(j - 1, ny), i] - 2.0 * c + v[k, _wrap(j + 1, ny), i])
                    out[k, j, i] = (0.25 * lap + e[k, j, i] * (v[kp, j, i] - c)
                                    - e[km, j, i] * (c - v[km, j, i]))
    return out_arr

# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: grid Horner evaluation and fixed-step RK4."""
import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


def horner_grid(const double[:, ::1] coeffs, const double[::1] taus):
    cdef Py_ssize_t d = coeffs.shape[0], m = coeffs.shape[1], nt = taus.shape[0]
    out_arr = np.empty((nt, m))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double t, acc
    for i in range(nt):
        t = taus[i]
        for j in range(m):
            acc = coeffs[d - 1, j]
            for k in range(d - 2, -1, -1):
                acc = acc * t + coeffs[k, j]
            out[i, j] = acc
    return out_arr


cdef inline void _matvec(const double[:, :, ::1] a, Py_ssize_t idx, double* x,
                         double* y, Py_ssize_t n) nogil:
    cdef Py_ssize_t r, c
    cdef double s
    for r in range(n):
        s = 0.0
        for c in range(n):
            s += a[idx, r, c] * x[c]
        y[r] = s


def rk4_steps(const double[:, :, ::1] half_grid, x0, Py_ssize_t nsteps, double h,
              double[:, ::1] out):
    cdef Py_ssize_t n = half_grid.shape[1]
    cdef Py_ssize_t i, r
    cdef double* buf = <double*> malloc(6 * n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* x = buf
    cdef double* tmp = buf + n
    cdef double* k1 = buf + 2 * n
    cdef double* k2 = buf + 3 * n
    cdef double* k3 = buf + 4 * n
    cdef double* k4 = buf + 5 * n
    cdef double[::1] xv = np.ascontiguousarray(x0, dtype=float)
    try:
        for r in range(n):
            x[r] = xv[r]
            out[0, r] = x[r]
        with nogil:
            for i in range(nsteps):
                _matvec(half_grid, 2 * i, x, k1, n)
                for r in range(n):
                    tmp[r] = x[r] + 0.5 * h * k1[r]
                _matvec(half_grid, 2 * i + 1, tmp, k2, n)
                for r in range(n):
                    tmp[r] = x[r] + 0.5 * h * k2[r]
                _matvec(half_grid, 2 * i + 1, tmp, k3, n)
                for r in range(n):
                    tmp[r] = x[r] + h * k3[r]
                _matvec(half_grid, 2 * i + 2, tmp, k4, n)
                for r in range(n):
                    x[r] = x[r] + (h / 6.0) * (k1[r] + 2.0 * k2[r] + 2.0 * k3[r] + k4[r])
                    out[i + 1, r] = x[r]
    finally:
        free(buf)
    return np.asarray(out)


def rk4_step(a0, am, a1, x, double h):
    grid = np.ascontiguousarray(np.stack([a0, am, a1]), dtype=float)
    out = np.empty((2, grid.shape[1]))
    rk4_steps(grid, x, 1, h, out)
    return out[1].copy()

# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled backend for the hot convolution kernels.

Bit-parity contract with _pykernels.py: identical error-free
transformations in identical order.  Overflow is detected by scanning the
outputs for non-finite values (any overflowed candidate forces an infinite
endpoint through the min/max/add chain), so the inner loops stay branch-light.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport INFINITY, fabs, ldexp, nextafter

cnp.import_array()

cdef double SPLITTER = 134217729.0  # 2**27 + 1
cdef double DEKKER_MIN = ldexp(1.0, -970)
cdef double DEKKER_MAX = ldexp(1.0, 970)


cdef inline double _add_lo(double a, double b) noexcept nogil:
    cdef double s = a + b
    cdef double t = s - a
    cdef double err = (a - (s - t)) + (b - t)
    if err < 0.0:
        return nextafter(s, -INFINITY)
    return s


cdef inline double _add_hi(double a, double b) noexcept nogil:
    cdef double s = a + b
    cdef double t = s - a
    cdef double err = (a - (s - t)) + (b - t)
    if err > 0.0:
        return nextafter(s, INFINITY)
    return s


cdef inline void _mul_cand(double a, double b, double* lo, double* hi) noexcept nogil:
    """Fold the enclosure of a*b into the running (lo, hi) candidates."""
    cdef double p, ap, ca, a_h, a_l, cb, b_h, b_l, err, clo, chi
    if a == 0.0 or b == 0.0:
        clo = 0.0
        chi = 0.0
    else:
        p = a * b
        ap = fabs(p)
        if ap <= DEKKER_MIN or ap >= DEKKER_MAX:
            clo = nextafter(p, -INFINITY)
            chi = nextafter(p, INFINITY)
        else:
            ca = SPLITTER * a
            a_h = ca - (ca - a)
            a_l = a - a_h
            cb = SPLITTER * b
            b_h = cb - (cb - b)
            b_l = b - b_h
            err = ((a_h * b_h - p) + a_h * b_l + a_l * b_h) + a_l * b_l
            if err > 0.0:
                clo = p
                chi = nextafter(p, INFINITY)
            elif err < 0.0:
                clo = nextafter(p, -INFINITY)
                chi = p
            else:
                clo = p
                chi = p
    if clo < lo[0]:
        lo[0] = clo
    if chi > hi[0]:
        hi[0] = chi


cdef _check_finite(arr):
    if not np.isfinite(arr).all():
        raise OverflowError("interval kernel overflowed the double range")


def interval_gram(double[:, ::1] qlo, double[:, ::1] qhi):
    cdef Py_ssize_t n = qlo.shape[0]
    cdef Py_ssize_t k = qlo.shape[1]
    glo_arr = np.zeros((n, n))
    ghi_arr = np.zeros((n, n))
    cdef double[:, ::1] glo = glo_arr
    cdef double[:, ::1] ghi = ghi_arr
    cdef Py_ssize_t i, j, c
    cdef double acc_lo, acc_hi, lo, hi, xl, xh
    with nogil:
        for i in range(n):
            for j in range(n):
                acc_lo = 0.0
                acc_hi = 0.0
                for c in range(k):
                    xl = qlo[i, c]
                    xh = qhi[i, c]
                    lo = INFINITY
                    hi = -INFINITY
                    _mul_cand(xl, qlo[j, c], &lo, &hi)
                    _mul_cand(xl, qhi[j, c], &lo, &hi)
                    _mul_cand(xh, qlo[j, c], &lo, &hi)
                    _mul_cand(xh, qhi[j, c], &lo, &hi)
                    acc_lo = _add_lo(acc_lo, lo)
                    acc_hi = _add_hi(acc_hi, hi)
                glo[i, j] = acc_lo
                ghi[i, j] = acc_hi
    _check_finite(glo_arr)
    _check_finite(ghi_arr)
    return glo_arr, ghi_arr


def interval_scatter(double[:, ::1] glo, double[:, ::1] ghi,
                     cnp.int64_t[:, ::1] table, Py_ssize_t out_len):
    cdef Py_ssize_t n0 = table.shape[0]
    cdef Py_ssize_t n1 = table.shape[1]
    rlo_arr = np.zeros(out_len)
    rhi_arr = np.zeros(out_len)
    cdef double[::1] rlo = rlo_arr
    cdef double[::1] rhi = rhi_arr
    cdef Py_ssize_t i, j
    cdef cnp.int64_t g
    with nogil:
        for i in range(n0):
            for j in range(n1):
                g = table[i, j]
                rlo[g] = _add_lo(rlo[g], glo[i, j])
                rhi[g] = _add_hi(rhi[g], ghi[i, j])
    _check_finite(rlo_arr)
    _check_finite(rhi_arr)
    return rlo_arr, rhi_arr


def interval_outer_scatter(double[::1] alo, double[::1] ahi,
                           double[::1] blo, double[::1] bhi,
                           cnp.int64_t[:, ::1] table, Py_ssize_t out_len):
    cdef Py_ssize_t n0 = table.shape[0]
    cdef Py_ssize_t n1 = table.shape[1]
    rlo_arr = np.zeros(out_len)
    rhi_arr = np.zeros(out_len)
    cdef double[::1] rlo = rlo_arr
    cdef double[::1] rhi = rhi_arr
    cdef Py_ssize_t i, j
    cdef cnp.int64_t g
    cdef double xl, xh, lo, hi
    with nogil:
        for i in range(n0):
            xl = alo[i]
            xh = ahi[i]
            for j in range(n1):
                lo = INFINITY
                hi = -INFINITY
                _mul_cand(xl, blo[j], &lo, &hi)
                _mul_cand(xl, bhi[j], &lo, &hi)
                _mul_cand(xh, blo[j], &lo, &hi)
                _mul_cand(xh, bhi[j], &lo, &hi)
                g = table[i, j]
                rlo[g] = _add_lo(rlo[g], lo)
                rhi[g] = _add_hi(rhi[g], hi)
    _check_finite(rlo_arr)
    _check_finite(rhi_arr)
    return rlo_arr, rhi_arr


def float_outer_scatter(double[::1] a, double[::1] b,
                        cnp.int64_t[:, ::1] table, Py_ssize_t out_len):
    cdef Py_ssize_t n0 = table.shape[0]
    cdef Py_ssize_t n1 = table.shape[1]
    r_arr = np.zeros(out_len)
    cdef double[::1] r = r_arr
    cdef Py_ssize_t i, j
    cdef double x
    with nogil:
        for i in range(n0):
            x = a[i]
            for j in range(n1):
                r[table[i, j]] += x * b[j]
    return r_arr

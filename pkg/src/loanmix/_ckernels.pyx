# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops.

Consumption for one signal group is affine in the CML share,
``c_j(theta) = c0_j + theta * d_j`` over noise nodes ``j``, so every kernel
takes the pair ``(c0, d)`` plus the noise weights ``w``.  Utility families
are encoded as ``(fam, p1, p2, scale)``: CRRA ``(0, gamma, -, s)``, CARA
``(1, lambda, -, s)``, quadratic ``(2, alpha, beta, s)``.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, exp, expm1, fabs, isnan
from libc.stdint cimport uint64_t

cnp.import_array()

cdef enum:
    MAX_EPS = 256


cdef inline double _u(int fam, double p1, double p2, double s, double c) noexcept nogil:
    if fam == 0:
        return s * pow(c, 1.0 - p1) / (1.0 - p1)
    elif fam == 1:
        return -s * expm1(-p1 * c)
    return s * (p1 * c - 0.5 * p2 * c * c)


cdef inline double _du(int fam, double p1, double p2, double s, double c) noexcept nogil:
    if fam == 0:
        return s * pow(c, -p1)
    elif fam == 1:
        return s * p1 * exp(-p1 * c)
    return s * (p1 - p2 * c)


cdef inline double _eu(int fam, double p1, double p2, double s, const double* c0,
                       const double* d, const double* w, Py_ssize_t m,
                       double theta) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(m):
        acc = acc + w[j] * _u(fam, p1, p2, s, c0[j] + theta * d[j])
    return acc


cdef inline double _foc(int fam, double p1, double p2, double s, const double* c0,
                        const double* d, const double* w, Py_ssize_t m,
                        double theta) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(m):
        acc = acc + w[j] * _du(fam, p1, p2, s, c0[j] + theta * d[j]) * d[j]
    return acc


cdef int _bisect(int fam, double p1, double p2, double s, const double* c0,
                 const double* d, const double* w, Py_ssize_t m, double rtol,
                 int max_iter, double* theta_out) noexcept nogil:
    """Status: 0 corner at 0, 1 corner at 1, 2 tolerance met, 3 interval exhausted, -1 NaN."""
    cdef double f0 = _foc(fam, p1, p2, s, c0, d, w, m, 0.0)
    cdef double f1, lo, hi, mid, fm, tol
    cdef int it
    if isnan(f0):
        theta_out[0] = 0.0
        return -1
    if f0 <= 0.0:
        theta_out[0] = 0.0
        return 0
    f1 = _foc(fam, p1, p2, s, c0, d, w, m, 1.0)
    if isnan(f1):
        theta_out[0] = 1.0
        return -1
    if f1 >= 0.0:
        theta_out[0] = 1.0
        return 1
    tol = rtol * fabs(f0)
    lo = 0.0
    hi = 1.0
    mid = 0.5
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        fm = _foc(fam, p1, p2, s, c0, d, w, m, mid)
        if isnan(fm):
            theta_out[0] = mid
            return -1
        if fabs(fm) <= tol:
            theta_out[0] = mid
            return 2
        if mid <= lo or mid >= hi:
            theta_out[0] = mid
            return 3
        if fm > 0.0:
            lo = mid
        else:
            hi = mid
    theta_out[0] = 0.5 * (lo + hi)
    return 3


def eu_theta(int fam, double p1, double p2, double s, const double[::1] c0,
             const double[::1] d, const double[::1] w, double theta):
    return _eu(fam, p1, p2, s, &c0[0], &d[0], &w[0], c0.shape[0], theta)


def foc_theta(int fam, double p1, double p2, double s, const double[::1] c0,
              const double[::1] d, const double[::1] w, double theta):
    return _foc(fam, p1, p2, s, &c0[0], &d[0], &w[0], c0.shape[0], theta)


def optimal_share(int fam, double p1, double p2, double s, const double[::1] c0,
                  const double[::1] d, const double[::1] w, double rtol, int max_iter):
    cdef double theta = 0.0
    cdef int status
    with nogil:
        status = _bisect(fam, p1, p2, s, &c0[0], &d[0], &w[0], c0.shape[0],
                         rtol, max_iter, &theta)
    return theta, status


def grid_argmax(int fam, double p1, double p2, double s, const double[::1] c0,
                const double[::1] d, const double[::1] w, Py_ssize_t n):
    cdef Py_ssize_t k, best_k = 0
    cdef double best, val, step = 1.0 / (n - 1)
    cdef Py_ssize_t m = c0.shape[0]
    with nogil:
        best = _eu(fam, p1, p2, s, &c0[0], &d[0], &w[0], m, 0.0)
        for k in range(1, n):
            val = _eu(fam, p1, p2, s, &c0[0], &d[0], &w[0], m, k * step)
            if val > best:
                best = val
                best_k = k
    if best_k == n - 1:
        return 1.0
    return best_k * step


def share_profile(int fam, double p1, double p2, double s, const double[::1] ys,
                  const double[::1] eps, const double[::1] we, double A, double omega,
                  double R, double abar, bint binary, double rtol, int max_iter):
    """CML share for every signal node at pool mean ``abar``.

    Returns ``(theta, status)`` arrays.  In binary mode the share is 1 only if
    CML-only is strictly better than ICL-only.
    """
    cdef Py_ssize_t n = ys.shape[0], m = eps.shape[0], i, j
    if m > MAX_EPS:
        raise ValueError("too many noise nodes")
    cdef double c0[MAX_EPS]
    cdef double d[MAX_EPS]
    cdef double a, th
    theta = np.empty(n, dtype=np.float64)
    status = np.empty(n, dtype=np.int64)
    cdef double[::1] tv = theta
    cdef cnp.int64_t[::1] sv = status
    with nogil:
        for i in range(n):
            for j in range(m):
                a = ys[i] + eps[j]
                c0[j] = (A + a) * omega - R * a / abar
                d[j] = R * (a / abar - 1.0)
            if binary:
                if (_eu(fam, p1, p2, s, c0, d, &we[0], m, 1.0)
                        > _eu(fam, p1, p2, s, c0, d, &we[0], m, 0.0)):
                    tv[i] = 1.0
                    sv[i] = 1
                else:
                    tv[i] = 0.0
                    sv[i] = 0
            else:
                sv[i] = _bisect(fam, p1, p2, s, c0, d, &we[0], m, rtol, max_iter, &th)
                tv[i] = th
    return theta, status


cdef inline uint64_t _splitmix(uint64_t seed, uint64_t counter) noexcept nogil:
    cdef uint64_t z = seed + (counter + 1) * <uint64_t>0x9E3779B97F4A7C15
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EB
    return z ^ (z >> 31)


def uniforms(uint64_t seed, uint64_t start, Py_ssize_t n, uint64_t stride, uint64_t offset):
    """Doubles in [0, 1) from counters ``(start + i) * stride + offset``."""
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            ov[i] = (_splitmix(seed, (start + <uint64_t>i) * stride + offset) >> 11) * (1.0 / 9007199254740992.0)
    return out

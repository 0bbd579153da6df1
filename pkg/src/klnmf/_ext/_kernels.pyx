# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels; see ``fallback`` for the contracts."""
import numpy as np

from libc.math cimport log, sqrt, fabs

cdef double WH_FLOOR = 1e-300


def kl_ratio(const double[:, ::1] X, const double[:, ::1] WH):
    cdef Py_ssize_t m = X.shape[0], n = X.shape[1], i, j
    cdef Py_ssize_t n_bad = 0
    cdef double kl = 0.0, x, wh
    for i in range(m):
        for j in range(n):
            if not (WH[i, j] >= WH_FLOOR):
                n_bad += 1
    if n_bad:
        return None, float("nan"), n_bad
    R_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] R = R_arr
    for i in range(m):
        for j in range(n):
            x = X[i, j]
            wh = WH[i, j]
            R[i, j] = x / wh
            if x > 0.0:
                kl += x * log(x / wh) - x + wh
            else:
                kl += wh - x
    return R_arr, kl, 0


def kl_value(const double[:, ::1] X, const double[:, ::1] WH):
    cdef Py_ssize_t m = X.shape[0], n = X.shape[1], i, j
    cdef double kl = 0.0, x, wh
    for i in range(m):
        for j in range(n):
            wh = WH[i, j]
            if not (wh >= WH_FLOOR):
                return float("nan"), 1
            x = X[i, j]
            if x > 0.0:
                kl += x * log(x / wh) - x + wh
            else:
                kl += wh - x
    return kl, 0


cdef inline double _prox(double p, double mu_lambda, int kind) nogil:
    cdef double q, c, root
    if kind == 1:
        q = p + mu_lambda
        root = sqrt(q * q + 4.0)
        if q > 0.0:
            return 2.0 / (q + root)
        return (root - q) / 2.0
    c = 1.0 + mu_lambda
    root = sqrt(p * p + 4.0 * c)
    if p > 0.0:
        return 2.0 / (p + root)
    return (root - p) / (2.0 * c)


def prox_values(P, double mu_lambda, int kind):
    cdef double[:, ::1] Pv = np.ascontiguousarray(P, dtype=np.float64)
    cdef Py_ssize_t a = Pv.shape[0], b = Pv.shape[1], i, j
    out_arr = np.empty((a, b), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(a):
        for j in range(b):
            out[i, j] = _prox(Pv[i, j], mu_lambda, kind)
    return out_arr


def prox_block(const double[:, ::1] S, const double[:, ::1] Y,
               const double[::1] lin, double lam, double mu_lambda,
               int kind, int lin_axis):
    cdef Py_ssize_t a = S.shape[0], b = S.shape[1], i, j
    cdef double y, p, L
    out_arr = np.empty((a, b), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(a):
        for j in range(b):
            y = Y[i, j]
            L = lin[j] if lin_axis == 1 else lin[i]
            p = lam * (-S[i, j] / y + L) - (-1.0 / y + y)
            out[i, j] = _prox(p, mu_lambda, kind)
    return out_arr


def ccd_rows(const double[:, ::1] X, double[:, ::1] A, const double[:, ::1] B,
             double[:, ::1] AB, int inner_iters, double floor, double tol):
    cdef Py_ssize_t p = A.shape[0], r = A.shape[1], q = B.shape[1]
    cdef Py_ssize_t i, l, j, t
    cdef long steps = 0
    cdef double g, h, a, new, delta, ratio, bsum, bj
    for i in range(p):
        for l in range(r):
            bsum = 0.0
            for j in range(q):
                bsum += B[l, j]
            for t in range(inner_iters):
                g = bsum
                h = 0.0
                for j in range(q):
                    if X[i, j] != 0.0:
                        bj = B[l, j]
                        ratio = X[i, j] / AB[i, j]
                        g -= ratio * bj
                        h += ratio / AB[i, j] * bj * bj
                a = A[i, l]
                if h > 0.0:
                    new = a - g / h
                    if new < floor:
                        new = floor
                elif g > 0.0:
                    new = floor
                else:
                    new = a
                delta = new - a
                A[i, l] = new
                for j in range(q):
                    AB[i, j] += delta * B[l, j]
                steps += 1
                if fabs(delta) <= tol * (new if new > 1.0 else 1.0):
                    break
    return steps

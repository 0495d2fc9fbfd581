# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled pairwise kernels. Semantics match _kernels_py exactly:
coincident pairs contribute zero, truncation is the closed annulus
a <= r <= b, pair sums run over ordered pairs i != j.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport atan2, fabs, pow, sqrt, INFINITY, M_PI

cnp.import_array()


def riesz_matvec(cnp.ndarray src_in, cnp.ndarray coef_in, cnp.ndarray tgt_in,
                 double d, double a=0.0, double b=INFINITY):
    cdef const double[:, ::1] src = np.ascontiguousarray(src_in, dtype=np.float64)
    cdef const double[:, ::1] tgt = np.ascontiguousarray(tgt_in, dtype=np.float64)
    cdef const double[::1] coef = np.ascontiguousarray(coef_in, dtype=np.float64)
    cdef Py_ssize_t I = src.shape[0], J = tgt.shape[0], n = tgt.shape[1]
    out_arr = np.zeros((J, n))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, k, c
    cdef double r2, w, a2 = a * a, b2 = b * b if b != INFINITY else INFINITY
    cdef double diff[16]
    cdef double expo = -(d + 1.0) / 2.0
    for k in range(J):
        for i in range(I):
            r2 = 0.0
            for c in range(n):
                diff[c] = tgt[k, c] - src[i, c]
                r2 += diff[c] * diff[c]
            if r2 <= 0.0 or r2 < a2 or r2 > b2:
                continue
            w = coef[i] * pow(r2, expo)
            for c in range(n):
                out[k, c] += w * diff[c]
    return out_arr


def riesz_rmatvec(cnp.ndarray src_in, cnp.ndarray tgt_in, cnp.ndarray vmat_in,
                  double d, double a=0.0, double b=INFINITY):
    cdef const double[:, ::1] src = np.ascontiguousarray(src_in, dtype=np.float64)
    cdef const double[:, ::1] tgt = np.ascontiguousarray(tgt_in, dtype=np.float64)
    cdef const double[:, ::1] vmat = np.ascontiguousarray(vmat_in, dtype=np.float64)
    cdef Py_ssize_t I = src.shape[0], J = tgt.shape[0], n = tgt.shape[1]
    out_arr = np.zeros(I)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, k, c
    cdef double r2, w, acc, a2 = a * a, b2 = b * b if b != INFINITY else INFINITY
    cdef double diff[16]
    cdef double expo = -(d + 1.0) / 2.0
    for i in range(I):
        acc = 0.0
        for k in range(J):
            r2 = 0.0
            for c in range(n):
                diff[c] = tgt[k, c] - src[i, c]
                r2 += diff[c] * diff[c]
            if r2 <= 0.0 or r2 < a2 or r2 > b2:
                continue
            w = pow(r2, expo)
            for c in range(n):
                acc += w * diff[c] * vmat[k, c]
        out[i] = acc
    return out_arr


def pair_moment2(cnp.ndarray pts_in, cnp.ndarray masses_in):
    cdef const double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef const double[::1] m = np.ascontiguousarray(masses_in, dtype=np.float64)
    cdef Py_ssize_t N = pts.shape[0], n = pts.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double r2, dx, total = 0.0
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            r2 = 0.0
            for c in range(n):
                dx = pts[i, c] - pts[j, c]
                r2 += dx * dx
            total += m[i] * m[j] * r2
    return total


def pair_directional_sum(cnp.ndarray pts_in, cnp.ndarray masses_in, cnp.ndarray dirs_in):
    cdef const double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef const double[::1] m = np.ascontiguousarray(masses_in, dtype=np.float64)
    cdef const double[:, ::1] dirs = np.ascontiguousarray(np.atleast_2d(dirs_in), dtype=np.float64)
    cdef Py_ssize_t N = pts.shape[0], n = pts.shape[1], D = dirs.shape[0]
    out_arr = np.zeros(D)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, c, t
    cdef double r2, w, proj
    cdef double diff[16]
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            r2 = 0.0
            for c in range(n):
                diff[c] = pts[i, c] - pts[j, c]
                r2 += diff[c] * diff[c]
            if r2 <= 0.0:
                continue
            w = m[i] * m[j] / sqrt(r2)
            for t in range(D):
                proj = 0.0
                for c in range(n):
                    proj += dirs[t, c] * diff[c]
                out[t] += w * fabs(proj)
    return out_arr


def pair_angle_hist(cnp.ndarray pts_in, cnp.ndarray masses_in, Py_ssize_t nbins):
    cdef const double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef const double[::1] m = np.ascontiguousarray(masses_in, dtype=np.float64)
    cdef Py_ssize_t N = pts.shape[0]
    out_arr = np.zeros(nbins)
    cdef double[::1] hist = out_arr
    cdef Py_ssize_t i, j, idx
    cdef double dx, dy, ang, scale = nbins / M_PI
    for i in range(N):
        for j in range(N):
            if i == j:
                continue
            dx = pts[i, 0] - pts[j, 0]
            dy = pts[i, 1] - pts[j, 1]
            if dx == 0.0 and dy == 0.0:
                continue
            ang = atan2(dy, dx)
            if ang < 0.0:
                ang += M_PI
            if ang >= M_PI:
                ang -= M_PI
            idx = <Py_ssize_t>(ang * scale)
            if idx >= nbins:
                idx = nbins - 1
            hist[idx] += m[i] * m[j]
    return out_arr


def pair_min_dist(cnp.ndarray pts_in):
    cdef const double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef Py_ssize_t N = pts.shape[0], n = pts.shape[1]
    if N < 2:
        return INFINITY
    cdef Py_ssize_t i, j, c
    cdef double r2, dx, best = INFINITY
    for i in range(N):
        for j in range(i + 1, N):
            r2 = 0.0
            for c in range(n):
                dx = pts[i, c] - pts[j, c]
                r2 += dx * dx
            if 0.0 < r2 < best:
                best = r2
    return sqrt(best) if best != INFINITY else INFINITY


def box_poisson_sum(cnp.ndarray pts_in, cnp.ndarray wts_in, cnp.ndarray lo_in,
                    cnp.ndarray hi_in, double numer, double power, double ell_pow):
    cdef const double[:, ::1] pts = np.ascontiguousarray(pts_in, dtype=np.float64)
    cdef const double[::1] wts = np.ascontiguousarray(wts_in, dtype=np.float64)
    cdef const double[::1] lo = np.ascontiguousarray(lo_in, dtype=np.float64)
    cdef const double[::1] hi = np.ascontiguousarray(hi_in, dtype=np.float64)
    cdef Py_ssize_t N = pts.shape[0], n = pts.shape[1]
    cdef Py_ssize_t i, c
    cdef double g, d2, total = 0.0
    for i in range(N):
        d2 = 0.0
        for c in range(n):
            g = 0.0
            if pts[i, c] < lo[c]:
                g = lo[c] - pts[i, c]
            elif pts[i, c] > hi[c]:
                g = pts[i, c] - hi[c]
            d2 += g * g
        total += wts[i] * numer / (ell_pow + pow(sqrt(d2), power))
    return total

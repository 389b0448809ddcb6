# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-pixel kernels. Must agree bit for bit with _pykernels."""

import numpy as np
cimport numpy as cnp
from libc.stdint cimport uint64_t, int64_t
from libc.math cimport fabs, NAN

cnp.import_array()

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t _mix64(uint64_t z) nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


def hash_counters(uint64_t key, uint64_t start, Py_ssize_t n):
    cdef cnp.ndarray[cnp.uint64_t, ndim=1] out = np.empty(n, dtype=np.uint64)
    cdef uint64_t[::1] view = out
    cdef Py_ssize_t j
    with nogil:
        for j in range(n):
            view[j] = _mix64(key + (start + <uint64_t>j + 1) * GOLDEN)
    return out


def plane_depth(int width, int height, double fx, double fy, double cx, double cy,
                const double[::1] center, const double[::1] normal, const double[::1] axis_w,
                const double[::1] axis_h, double half_w, double half_h, double background):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((height, width), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double nc = normal[0] * center[0] + normal[1] * center[1] + normal[2] * center[2]
    cdef double rx, ry, denom, t, dx, dy, dz, a, b
    cdef int u, v
    with nogil:
        for v in range(height):
            ry = (v - cy) / fy
            for u in range(width):
                rx = (u - cx) / fx
                denom = normal[0] * rx + normal[1] * ry + normal[2]
                t = nc / denom
                dx = t * rx - center[0]
                dy = t * ry - center[1]
                dz = t - center[2]
                a = dx * axis_w[0] + dy * axis_w[1] + dz * axis_w[2]
                b = dx * axis_h[0] + dy * axis_h[1] + dz * axis_h[2]
                if t > 0 and fabs(a) <= half_w and fabs(b) <= half_h:
                    o[v, u] = t
                else:
                    o[v, u] = background
    return out


def remap_nearest(const float[:, ::1] depth, const double[:, ::1] field,
                  const int64_t[:, ::1] shift_u, const int64_t[:, ::1] shift_v):
    cdef Py_ssize_t h = depth.shape[0], w = depth.shape[1]
    cdef cnp.ndarray[cnp.float32_t, ndim=2] out_d = np.empty((h, w), dtype=np.float32)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out_f = np.empty((h, w), dtype=np.float64)
    cdef float[:, ::1] od = out_d
    cdef double[:, ::1] of = out_f
    cdef Py_ssize_t u, v
    cdef int64_t su, sv
    with nogil:
        for v in range(h):
            for u in range(w):
                su = u + shift_u[v, u]
                sv = v + shift_v[v, u]
                if su < 0 or su >= w or sv < 0 or sv >= h:
                    od[v, u] = NAN
                    of[v, u] = field[v, u]
                else:
                    od[v, u] = depth[sv, su]
                    of[v, u] = field[sv, su]
    return out_d, out_f

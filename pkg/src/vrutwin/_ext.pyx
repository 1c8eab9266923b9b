# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels; see ``_kernels_py`` for the reference semantics."""

import numpy as np
from libc.math cimport exp, sin, cos, sqrt, atan2, fabs, M_PI


# The activation loops run over raw contiguous spans so that gcc can
# vectorise the exp calls; keep them branch-light.

cdef void _sigmoid_span(const double* z, double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k
    cdef double e
    for k in range(n):
        e = exp(-fabs(z[k]))
        out[k] = (1.0 if z[k] >= 0.0 else e) / (1.0 + e)


cdef void _tanh_span(const double* z, double* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t k
    cdef double e, t
    for k in range(n):
        e = exp(-2.0 * fabs(z[k]))
        t = (1.0 - e) / (1.0 + e)
        out[k] = t if z[k] >= 0.0 else -t


def lstm_gates_forward(const double[:, ::1] z, const double[:, ::1] c_prev):
    cdef Py_ssize_t n = z.shape[0]
    cdef Py_ssize_t hid = z.shape[1] // 4
    act_arr = np.empty((n, 4 * hid))
    c_arr = np.empty((n, hid))
    tc_arr = np.empty((n, hid))
    h_arr = np.empty((n, hid))
    if n == 0 or hid == 0:
        return act_arr, c_arr, tc_arr, h_arr
    cdef double[:, ::1] act_v = act_arr
    cdef double[:, ::1] c_v = c_arr
    cdef double[:, ::1] tc_v = tc_arr
    cdef double[:, ::1] h_v = h_arr
    cdef const double* zp = &z[0, 0]
    cdef const double* cp = &c_prev[0, 0]
    cdef double* act = &act_v[0, 0]
    cdef double* c = &c_v[0, 0]
    cdef double* tc = &tc_v[0, 0]
    cdef double* h = &h_v[0, 0]
    cdef Py_ssize_t r, j, w = 4 * hid
    cdef double* a
    with nogil:
        for r in range(n):
            a = act + r * w
            _sigmoid_span(zp + r * w, a, 2 * hid)
            _tanh_span(zp + r * w + 2 * hid, a + 2 * hid, hid)
            _sigmoid_span(zp + r * w + 3 * hid, a + 3 * hid, hid)
            for j in range(hid):
                c[r * hid + j] = a[hid + j] * cp[r * hid + j] + a[j] * a[2 * hid + j]
        _tanh_span(c, tc, n * hid)
        for r in range(n):
            for j in range(hid):
                h[r * hid + j] = act[r * w + 3 * hid + j] * tc[r * hid + j]
    return act_arr, c_arr, tc_arr, h_arr


def lstm_gates_backward(const double[:, ::1] dh, const double[:, ::1] dc_next,
                        const double[:, ::1] act, const double[:, ::1] c_prev,
                        const double[:, ::1] tanh_c):
    cdef Py_ssize_t n = dh.shape[0]
    cdef Py_ssize_t hid = dh.shape[1]
    dz_arr = np.empty((n, 4 * hid))
    dcp_arr = np.empty((n, hid))
    cdef double[:, ::1] dz = dz_arr
    cdef double[:, ::1] dcp = dcp_arr
    cdef Py_ssize_t r, j
    cdef double ig, fg, gg, og, t, dc, d
    with nogil:
        for r in range(n):
            for j in range(hid):
                ig = act[r, j]
                fg = act[r, hid + j]
                gg = act[r, 2 * hid + j]
                og = act[r, 3 * hid + j]
                t = tanh_c[r, j]
                d = dh[r, j]
                dc = dc_next[r, j] + d * og * (1.0 - t * t)
                dz[r, j] = dc * gg * ig * (1.0 - ig)
                dz[r, hid + j] = dc * c_prev[r, j] * fg * (1.0 - fg)
                dz[r, 2 * hid + j] = dc * ig * (1.0 - gg * gg)
                dz[r, 3 * hid + j] = d * t * og * (1.0 - og)
                dcp[r, j] = dc * fg
    return dz_arr, dcp_arr


def haversine_many(lat1, lon1, lat2, lon2, double radius):
    a1 = np.ascontiguousarray(np.broadcast_to(np.asarray(lat1, dtype=float), np.broadcast_shapes(
        np.shape(lat1), np.shape(lon1), np.shape(lat2), np.shape(lon2))))
    shape = a1.shape
    cdef const double[::1] la1 = a1.ravel()
    cdef const double[::1] lo1 = np.ascontiguousarray(np.broadcast_to(np.asarray(lon1, dtype=float), shape)).ravel()
    cdef const double[::1] la2 = np.ascontiguousarray(np.broadcast_to(np.asarray(lat2, dtype=float), shape)).ravel()
    cdef const double[::1] lo2 = np.ascontiguousarray(np.broadcast_to(np.asarray(lon2, dtype=float), shape)).ravel()
    cdef Py_ssize_t n = la1.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef double deg = M_PI / 180.0
    cdef double p1, p2, s1, s2, a
    cdef Py_ssize_t k
    with nogil:
        for k in range(n):
            p1 = la1[k] * deg
            p2 = la2[k] * deg
            s1 = sin((p2 - p1) / 2.0)
            s2 = sin((lo2[k] - lo1[k]) * deg / 2.0)
            a = s1 * s1 + cos(p1) * cos(p2) * s2 * s2
            if a < 0.0:
                a = 0.0
            elif a > 1.0:
                a = 1.0
            out[k] = 2.0 * radius * atan2(sqrt(a), sqrt(1.0 - a))
    return out_arr.reshape(shape)

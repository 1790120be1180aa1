# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled flow kernels.

Per-point loops over the backward characteristic steps with the GIL
released, so several threads can share one process.  The arithmetic mirrors
``gyroscale._fallback`` operation for operation.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sin, cos, isfinite, M_PI

cnp.import_array()

cdef double TWO_PI = 2.0 * M_PI


cdef double C0 = cos(0.0), C1 = cos(1.0), C2 = cos(2.0)
cdef double S0 = sin(0.0), S1 = sin(1.0), S2 = sin(2.0)


cdef inline void _fields(int code, const double* p, double x0, double x1, double x2,
                         double* E, double* B) noexcept nogil:
    # component i uses sin(k x_{i+1} + i) for E and cos(k x_{i+2} + i) for B,
    # expanded by angle addition so only three sin/cos pairs are needed
    cdef double w, k, s0, s1, s2, c0, c1, c2
    E[0] = p[0]; E[1] = p[1]; E[2] = p[2]
    B[0] = p[3]; B[1] = p[4]; B[2] = p[5]
    if code == 2:
        k = p[12]
        w = 1.0 / (1.0 + (x0 * x0 + x1 * x1 + x2 * x2) / (p[13] * p[13]))
        s0 = sin(k * x0); c0 = cos(k * x0)
        s1 = sin(k * x1); c1 = cos(k * x1)
        s2 = sin(k * x2); c2 = cos(k * x2)
        E[0] += p[6] * (s1 * C0 + c1 * S0) * w
        E[1] += p[7] * (s2 * C1 + c2 * S1) * w
        E[2] += p[8] * (s0 * C2 + c0 * S2) * w
        B[0] += p[9] * (c2 * C0 - s2 * S0) * w
        B[1] += p[10] * (c0 * C1 - s0 * S1) * w
        B[2] += p[11] * (c1 * C2 - s1 * S2) * w


cdef inline void _acc(const double* v, const double* E, const double* B, double* out) noexcept nogil:
    out[0] = E[0] + (v[1] * B[2] - v[2] * B[1])
    out[1] = E[1] + (v[2] * B[0] - v[0] * B[2])
    out[2] = E[2] + (v[0] * B[1] - v[1] * B[0])


cdef inline void _kick(double* v, const double* E, const double* B, double d) noexcept nogil:
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double w[3]
    cdef int i
    _acc(v, E, B, k1)
    for i in range(3):
        w[i] = v[i] + 0.5 * d * k1[i]
    _acc(w, E, B, k2)
    for i in range(3):
        w[i] = v[i] + 0.5 * d * k2[i]
    _acc(w, E, B, k3)
    for i in range(3):
        w[i] = v[i] + d * k3[i]
    _acc(w, E, B, k4)
    for i in range(3):
        v[i] = v[i] + d / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])


cdef inline void _rotate_drift(double* x, double* v, double d, double a, double b,
                               double C, double S) noexcept nogil:
    cdef double v2 = v[1]
    cdef double v3 = v[2]
    x[0] += d * v[0]
    x[1] += a * v2 + b * v3
    x[2] += -b * v2 + a * v3
    v[1] = C * v2 + S * v3
    v[2] = -S * v2 + C * v3


cdef inline void _rhs_full(const double* x, const double* v, int code, const double* p,
                           double theta, double* dx, double* dv) noexcept nogil:
    cdef double E[3]
    cdef double B[3]
    _fields(code, p, x[0], x[1], x[2], E, B)
    _acc(v, E, B, dv)
    dv[1] += theta * v[2]
    dv[2] -= theta * v[1]
    dx[0] = v[0]; dx[1] = v[1]; dx[2] = v[2]


cdef inline long _strang_point(double* x, double* v, double h, long n, int code,
                               const double* p, double theta) noexcept nogil:
    cdef double E[3]
    cdef double B[3]
    cdef long k
    cdef int i
    # the rotation angle is the same at every step
    cdef double ph = theta * h
    cdef double S = sin(ph)
    cdef double half = sin(0.5 * ph)
    cdef double omc = 2.0 * half * half
    cdef double a = S / theta
    cdef double b = omc / theta
    cdef double C = 1.0 - omc
    _fields(code, p, x[0], x[1], x[2], E, B)
    for k in range(n):
        _kick(v, E, B, 0.5 * h)
        _rotate_drift(x, v, h, a, b, C, S)
        _fields(code, p, x[0], x[1], x[2], E, B)
        _kick(v, E, B, 0.5 * h)
        for i in range(3):
            if not (isfinite(x[i]) and isfinite(v[i])):
                return k
    return -1


cdef inline long _rk4_point(double* x, double* v, double h, long n, int code,
                            const double* p, double theta) noexcept nogil:
    cdef double k1x[3]
    cdef double k1v[3]
    cdef double k2x[3]
    cdef double k2v[3]
    cdef double k3x[3]
    cdef double k3v[3]
    cdef double k4x[3]
    cdef double k4v[3]
    cdef double wx[3]
    cdef double wv[3]
    cdef long k
    cdef int i
    for k in range(n):
        _rhs_full(x, v, code, p, theta, k1x, k1v)
        for i in range(3):
            wx[i] = x[i] + 0.5 * h * k1x[i]
            wv[i] = v[i] + 0.5 * h * k1v[i]
        _rhs_full(wx, wv, code, p, theta, k2x, k2v)
        for i in range(3):
            wx[i] = x[i] + 0.5 * h * k2x[i]
            wv[i] = v[i] + 0.5 * h * k2v[i]
        _rhs_full(wx, wv, code, p, theta, k3x, k3v)
        for i in range(3):
            wx[i] = x[i] + h * k3x[i]
            wv[i] = v[i] + h * k3v[i]
        _rhs_full(wx, wv, code, p, theta, k4x, k4v)
        for i in range(3):
            x[i] = x[i] + h / 6.0 * (k1x[i] + 2.0 * k2x[i] + 2.0 * k3x[i] + k4x[i])
            v[i] = v[i] + h / 6.0 * (k1v[i] + 2.0 * k2v[i] + 2.0 * k3v[i] + k4v[i])
        for i in range(3):
            if not (isfinite(x[i]) and isfinite(v[i])):
                return k
    return -1


def flow_full(const double[:] t, const double[:, :] x, const double[:, :] v, double eps, int code,
              const double[:] p, const long long[:] nsteps, int method):
    """Backward characteristics of the full equation; see ``_fallback.flow_full``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xo = np.array(x, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] vo = np.array(v, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bad = np.full(n, -1, dtype=np.int64)
    cdef double[:, ::1] xv = xo
    cdef double[:, ::1] vv = vo
    cdef long long[:] bv = bad
    cdef double[::1] pc = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double* pp = &pc[0]
    cdef double theta = TWO_PI / eps
    cdef double h
    cdef long ns
    cdef Py_ssize_t j
    with nogil:
        for j in range(n):
            ns = nsteps[j]
            if ns <= 0:
                continue
            h = -t[j] / ns
            if method == 0:
                bv[j] = _strang_point(&xv[j, 0], &vv[j, 0], h, ns, code, pp, theta)
            else:
                bv[j] = _rk4_point(&xv[j, 0], &vv[j, 0], h, ns, code, pp, theta)
    return xo, vo, bad


cdef inline void _rhs_gc(double a, double x2, double x3, double b, int code,
                         const double* p, double* out) noexcept nogil:
    cdef double E[3]
    cdef double B[3]
    _fields(code, p, a, x2, x3, E, B)
    out[0] = b
    out[1] = E[0]
    out[2] = B[0]


def flow_gc(const double[:] t, const double[:, :] x, const double[:, :] u, int code, const double[:] p,
            const long long[:] nsteps):
    """Backward characteristics of the averaged model; see ``_fallback.flow_gc``."""
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] xo = np.array(x, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] uo = np.array(u, dtype=np.float64, copy=True)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] bad = np.full(n, -1, dtype=np.int64)
    cdef double[:, ::1] xv = xo
    cdef double[:, ::1] uv = uo
    cdef long long[:] bv = bad
    cdef double k1[3]
    cdef double k2[3]
    cdef double k3[3]
    cdef double k4[3]
    cdef double a, b, c, h, x2, x3, cs, sn, u2, u3
    cdef long k, ns
    cdef Py_ssize_t j
    cdef double[::1] pc = np.ascontiguousarray(p, dtype=np.float64)
    cdef const double* pp = &pc[0]
    with nogil:
        for j in range(n):
            ns = nsteps[j]
            a = xv[j, 0]
            b = uv[j, 0]
            c = 0.0
            x2 = xv[j, 1]
            x3 = xv[j, 2]
            if ns > 0:
                h = -t[j] / ns
                for k in range(ns):
                    _rhs_gc(a, x2, x3, b, code, pp, k1)
                    _rhs_gc(a + 0.5 * h * k1[0], x2, x3, b + 0.5 * h * k1[1], code, pp, k2)
                    _rhs_gc(a + 0.5 * h * k2[0], x2, x3, b + 0.5 * h * k2[1], code, pp, k3)
                    _rhs_gc(a + h * k3[0], x2, x3, b + h * k3[1], code, pp, k4)
                    a = a + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0])
                    b = b + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1])
                    c = c + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2])
                    if not (isfinite(a) and isfinite(b) and isfinite(c)):
                        bv[j] = k
                        break
            xv[j, 0] = a
            uv[j, 0] = b
            cs = cos(c)
            sn = sin(c)
            u2 = uv[j, 1]
            u3 = uv[j, 2]
            uv[j, 1] = cs * u2 + sn * u3
            uv[j, 2] = -sn * u2 + cs * u3
    return xo, uo, bad

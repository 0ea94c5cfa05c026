# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Dormand-Prince kernel for quadratic ODEs.

Mirrors ``_fallback.integrate_quadratic`` step for step; the right-hand side
``F0 + F1 u + F2 (u kron u)`` is evaluated in plain C loops, which removes the
per-stage numpy overhead that dominates for small state dimensions.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow, fabs

cnp.import_array()

cdef double C2 = 1.0 / 5, C3 = 3.0 / 10, C4 = 4.0 / 5, C5 = 8.0 / 9
cdef double A21 = 1.0 / 5
cdef double A31 = 3.0 / 40, A32 = 9.0 / 40
cdef double A41 = 44.0 / 45, A42 = -56.0 / 15, A43 = 32.0 / 9
cdef double A51 = 19372.0 / 6561, A52 = -25360.0 / 2187, A53 = 64448.0 / 6561, A54 = -212.0 / 729
cdef double A61 = 9017.0 / 3168, A62 = -355.0 / 33, A63 = 46732.0 / 5247, A64 = 49.0 / 176, A65 = -5103.0 / 18656
cdef double B1 = 35.0 / 384, B3 = 500.0 / 1113, B4 = 125.0 / 192, B5 = -2187.0 / 6784, B6 = 11.0 / 84
cdef double E1 = 71.0 / 57600, E3 = -71.0 / 16695, E4 = 71.0 / 1920, E5 = -17253.0 / 339200
cdef double E6 = 22.0 / 525, E7 = -1.0 / 40


cdef void _rhs(double[::1] F0, double[:, ::1] F1, double[:, ::1] F2,
               double[::1] x, double[::1] out, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i, a, b
    cdef double s, xa
    for i in range(d):
        s = F0[i]
        for a in range(d):
            s += F1[i, a] * x[a]
        for a in range(d):
            xa = x[a]
            if xa != 0.0:
                for b in range(d):
                    s += F2[i, a * d + b] * xa * x[b]
        out[i] = s


cdef double _rms_scaled(double[::1] v, double[::1] sc, Py_ssize_t d) noexcept nogil:
    cdef Py_ssize_t i
    cdef double acc = 0.0, q
    for i in range(d):
        q = v[i] / sc[i]
        acc += q * q
    return sqrt(acc / d)


def integrate_quadratic(F0, F1, F2, u0, double T, double rtol, double atol,
                        Py_ssize_t max_steps=1000000):
    cdef double[::1] f0 = np.ascontiguousarray(F0, dtype=np.float64)
    cdef double[:, ::1] f1 = np.ascontiguousarray(F1, dtype=np.float64)
    cdef double[:, ::1] f2 = np.ascontiguousarray(F2, dtype=np.float64)
    cdef Py_ssize_t d = f0.shape[0]
    cdef double[::1] u = np.array(u0, dtype=np.float64)
    cdef double[::1] un = np.empty(d)
    cdef double[::1] tmp = np.empty(d)
    cdef double[::1] sc = np.empty(d)
    cdef double[::1] err = np.empty(d)
    cdef double[::1] k1 = np.empty(d)
    cdef double[::1] k2 = np.empty(d)
    cdef double[::1] k3 = np.empty(d)
    cdef double[::1] k4 = np.empty(d)
    cdef double[::1] k5 = np.empty(d)
    cdef double[::1] k6 = np.empty(d)
    cdef double[::1] k7 = np.empty(d)
    cdef Py_ssize_t i, steps = 0
    cdef double t = 0.0, h, h1, d0, d1, d2, dm, enorm, fac, au, aun
    cdef int status = 0

    ts = [0.0]
    us = [np.asarray(u).copy()]
    _rhs(f0, f1, f2, u, k1, d)
    fs = [np.asarray(k1).copy()]
    if T == 0:
        return np.array(ts), np.array(us), np.array(fs), 0

    for i in range(d):
        sc[i] = atol + rtol * fabs(u[i])
    d0 = _rms_scaled(u, sc, d)
    d1 = _rms_scaled(k1, sc, d)
    if d0 < 1e-5 or d1 < 1e-5:
        h = 1e-6
    else:
        h = 0.01 * d0 / d1
    if h > T:
        h = T
    for i in range(d):
        tmp[i] = u[i] + h * k1[i]
    _rhs(f0, f1, f2, tmp, k2, d)
    for i in range(d):
        err[i] = k2[i] - k1[i]
    d2 = _rms_scaled(err, sc, d) / h
    dm = d1 if d1 > d2 else d2
    if dm <= 1e-15:
        h1 = h * 1e-3
        if h1 < 1e-6:
            h1 = 1e-6
    else:
        h1 = pow(0.01 / dm, 0.2)
    h = min(100 * h, h1, T)

    while t < T:
        if steps >= max_steps:
            status = 2
            break
        if h < 1e-14 * max(1.0, fabs(t)):
            status = 1
            break
        if t + h > T:
            h = T - t
        with nogil:
            for i in range(d):
                tmp[i] = u[i] + h * (A21 * k1[i])
            _rhs(f0, f1, f2, tmp, k2, d)
            for i in range(d):
                tmp[i] = u[i] + h * (A31 * k1[i] + A32 * k2[i])
            _rhs(f0, f1, f2, tmp, k3, d)
            for i in range(d):
                tmp[i] = u[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i])
            _rhs(f0, f1, f2, tmp, k4, d)
            for i in range(d):
                tmp[i] = u[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            _rhs(f0, f1, f2, tmp, k5, d)
            for i in range(d):
                tmp[i] = u[i] + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            _rhs(f0, f1, f2, tmp, k6, d)
            for i in range(d):
                un[i] = u[i] + h * (B1 * k1[i] + B3 * k3[i] + B4 * k4[i] + B5 * k5[i] + B6 * k6[i])
            _rhs(f0, f1, f2, un, k7, d)
            for i in range(d):
                err[i] = h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i])
                au = fabs(u[i])
                aun = fabs(un[i])
                sc[i] = atol + rtol * (au if au > aun else aun)
            enorm = _rms_scaled(err, sc, d)
        steps += 1
        if enorm <= 1.0:
            if T - (t + h) <= 1e-15 * T:
                t = T
            else:
                t = t + h
            for i in range(d):
                u[i] = un[i]
                k1[i] = k7[i]
            ts.append(t)
            us.append(np.asarray(u).copy())
            fs.append(np.asarray(k1).copy())
            if enorm == 0:
                fac = 5.0
            else:
                fac = min(5.0, 0.9 * pow(enorm, -0.2))
        else:
            fac = max(0.2, 0.9 * pow(enorm, -0.2))
        h *= fac
    return np.array(ts), np.array(us), np.array(fs), status

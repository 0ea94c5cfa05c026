"""Pure-Python implementations of the compiled kernels in ``_kernels.pyx``.

Both modules expose the same functions with the same signatures and run the
same step sequence. Summation order differs, and the embedded error estimate
(a difference of nearly equal stages) amplifies that into step sizes that
differ around 1e-10 relative; results agree well inside the integration
tolerance. ``kernels`` picks one at import time.
"""

from __future__ import annotations

import math

import numpy as np

# Dormand-Prince 5(4) tableau
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
B1, B3, B4, B5, B6 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

STATUS_OK = 0
STATUS_UNDERFLOW = 1
STATUS_MAX_STEPS = 2


def quadratic_rhs(F0, F1, F2, u):
    """``F0 + F1 u + F2 (u kron u)``."""
    return F0 + F1 @ u + F2 @ np.kron(u, u)


def integrate_quadratic(F0, F1, F2, u0, T, rtol, atol, max_steps=1_000_000):
    """Adaptive Dormand-Prince integration of a quadratic ODE on ``[0, T]``.

    Returns ``(ts, us, fs, status)`` where ``fs`` holds the right-hand side at
    each accepted node (for Hermite dense output) and ``status`` is 0 on
    success, 1 on step-size underflow, 2 when ``max_steps`` was hit.
    """
    F0 = np.asarray(F0, dtype=float)
    F1 = np.asarray(F1, dtype=float)
    F2 = np.asarray(F2, dtype=float)
    u = np.array(u0, dtype=float)

    def f(x):
        return F0 + F1 @ x + F2 @ np.kron(x, x)

    ts, us, fs = [0.0], [u.copy()], []
    k1 = f(u)
    fs.append(k1)
    if T == 0:
        return np.array(ts), np.array(us), np.array(fs), STATUS_OK

    # starting step (Hairer, Norsett & Wanner, II.4)
    sc = atol + rtol * np.abs(u)
    d0 = math.sqrt(np.mean((u / sc) ** 2))
    d1 = math.sqrt(np.mean((k1 / sc) ** 2))
    h = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h = min(h, T)
    u1 = u + h * k1
    d2 = math.sqrt(np.mean(((f(u1) - k1) / sc) ** 2)) / h
    dm = max(d1, d2)
    h1 = max(1e-6, h * 1e-3) if dm <= 1e-15 else (0.01 / dm) ** 0.2
    h = min(100 * h, h1, T)

    t = 0.0
    steps = 0
    while t < T:
        if steps >= max_steps:
            return np.array(ts), np.array(us), np.array(fs), STATUS_MAX_STEPS
        if h < 1e-14 * max(1.0, abs(t)):
            return np.array(ts), np.array(us), np.array(fs), STATUS_UNDERFLOW
        if t + h > T:
            h = T - t
        k2 = f(u + h * (A21 * k1))
        k3 = f(u + h * (A31 * k1 + A32 * k2))
        k4 = f(u + h * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = f(u + h * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = f(u + h * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        un = u + h * (B1 * k1 + B3 * k3 + B4 * k4 + B5 * k5 + B6 * k6)
        k7 = f(un)
        err = h * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = atol + rtol * np.maximum(np.abs(u), np.abs(un))
        enorm = math.sqrt(np.mean((err / sc) ** 2))
        steps += 1
        if enorm <= 1.0:
            t = T if T - (t + h) <= 1e-15 * T else t + h
            u, k1 = un, k7
            ts.append(t)
            us.append(u.copy())
            fs.append(k1)
            fac = 5.0 if enorm == 0 else min(5.0, 0.9 * enorm**-0.2)
        else:
            fac = max(0.2, 0.9 * enorm**-0.2)
        h *= fac
    return np.array(ts), np.array(us), np.array(fs), STATUS_OK


def hermite_eval(ts, us, fs, t, gs=None):
    """Hermite interpolation of accepted nodes at times ``t`` (array).

    Cubic from values and first derivatives; quintic when the second
    derivatives ``gs`` are supplied as well.
    """
    ts = np.asarray(ts)
    t = np.atleast_1d(np.asarray(t, dtype=float))
    idx = np.clip(np.searchsorted(ts, t, side="right") - 1, 0, len(ts) - 2)
    t0, t1 = ts[idx], ts[idx + 1]
    h = t1 - t0
    s = ((t - t0) / h)[:, None]
    h = h[:, None]
    s2, s3 = s * s, s**3
    if gs is None:
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        # h00 + h01 = 1, written so that constant data is reproduced exactly
        return us[idx] + h01 * (us[idx + 1] - us[idx]) + h10 * h * fs[idx] + h11 * h * fs[idx + 1]
    s4, s5 = s3 * s, s3 * s2
    v0 = s - 6 * s3 + 8 * s4 - 3 * s5
    a0 = 0.5 * (s2 - 3 * s3 + 3 * s4 - s5)
    a1 = 0.5 * (s3 - 2 * s4 + s5)
    v1 = -4 * s3 + 7 * s4 - 3 * s5
    p1 = 10 * s3 - 15 * s4 + 6 * s5
    return (
        us[idx]
        + p1 * (us[idx + 1] - us[idx])
        + v0 * h * fs[idx]
        + a0 * h * h * gs[idx]
        + a1 * h * h * gs[idx + 1]
        + v1 * h * fs[idx + 1]
    )

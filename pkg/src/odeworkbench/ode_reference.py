"""Reference solutions used as oracles by the emulator and Carleman checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kernels
from .errors import InputError, NumericError
from .linalg_core import DENSE_LIMIT, MatrixHandle, mat_exp, phi1
from .spectral_bounds import _golden_max
from .taylor_system import SolverParams, taylor_S, taylor_T

MIN_SAMPLES = 2048


@dataclass(frozen=True)
class LinearProblem:
    """``dx/dt = A x + b``, ``x(0) = x0``, on ``[0, T]`` with target error ``eps``."""

    A: MatrixHandle
    b: np.ndarray
    x0: np.ndarray
    T: float
    eps: float = 1e-2

    def __post_init__(self):
        A = MatrixHandle.from_any(self.A)
        object.__setattr__(self, "A", A)
        b = np.asarray(self.b, dtype=complex).ravel()
        x0 = np.asarray(self.x0, dtype=complex).ravel()
        if b.size != A.dim or x0.size != A.dim:
            raise InputError(f"dimension mismatch: A is {A.dim}, b is {b.size}, x0 is {x0.size}")
        if not (math.isfinite(self.T) and self.T > 0):
            raise InputError(f"T must be finite and positive, got {self.T}")
        if not (0 < self.eps < 1):
            raise InputError(f"eps must lie in (0, 1), got {self.eps}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(x0))):
            raise InputError("b and x0 must be finite")
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "x0", x0)

    @property
    def d(self) -> int:
        return self.A.dim


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    norms: np.ndarray
    g: float
    max_norm: float
    argmax_t: float

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


def _refined_max(norm_at: Callable[[float], float], times, norms) -> tuple[float, float]:
    i = int(np.argmax(norms))
    best_t, best = float(times[i]), float(norms[i])
    lo, hi = times[max(i - 1, 0)], times[min(i + 1, len(times) - 1)]
    if hi > lo:
        t, v = _golden_max(norm_at, float(lo), float(hi), 1e-10)
        if v > best:
            best_t, best = t, v
    return best_t, best


def _make_trajectory(times, states, norm_at) -> Trajectory:
    norms = np.linalg.norm(states, axis=1)
    t_star, nmax = _refined_max(norm_at, times, norms)
    final = float(norms[-1])
    if final == 0.0:
        g = 1.0 if nmax == 0.0 else math.inf
    else:
        g = max(1.0, nmax / final)
    return Trajectory(times=times, states=states, norms=norms, g=g, max_norm=nmax, argmax_t=t_star)


def exact_linear_solution(prob: LinearProblem, t: float) -> np.ndarray:
    """``x(t) = e^{At} x0 + (int_0^t e^{As} ds) b``; fine for singular ``A``."""
    if not (0 <= t <= prob.T * (1 + 1e-12)):
        raise InputError(f"t={t} outside [0, {prob.T}]")
    if prob.A.is_sparse and prob.d > DENSE_LIMIT // 2:
        return _augmented_expm_multiply(prob, t)
    x = mat_exp(prob.A, t) @ prob.x0
    if np.any(prob.b):
        x = x + phi1(prob.A, t) @ prob.b
    return x


def _augmented(prob: LinearProblem) -> sp.csr_matrix:
    # [[A, b], [0, 0]] acting on (x, 1)
    d = prob.d
    Ab = sp.bmat(
        [[prob.A.sparse(), sp.csr_matrix(prob.b.reshape(d, 1))], [None, sp.csr_matrix((1, 1), dtype=complex)]],
        format="csr",
    )
    return Ab


def _augmented_expm_multiply(prob: LinearProblem, t: float) -> np.ndarray:
    v = np.append(prob.x0, 1.0).astype(complex)
    return spla.expm_multiply(_augmented(prob) * t, v)[:-1]


def linear_trajectory(prob: LinearProblem, samples: int = MIN_SAMPLES) -> Trajectory:
    """Exact solution on a uniform grid of ``samples`` points plus refined max norm."""
    samples = max(int(samples), 2)
    times = np.linspace(0.0, prob.T, samples)
    v = np.append(prob.x0, 1.0).astype(complex)
    states = spla.expm_multiply(_augmented(prob), v, start=0.0, stop=prob.T, num=samples, endpoint=True)[:, :-1]
    return _make_trajectory(times, states, lambda s: float(np.linalg.norm(exact_linear_solution(prob, s))))


def taylor_recursion(prob: LinearProblem, params: SolverParams) -> list[np.ndarray]:
    """Iterates ``y_{i+1} = T_k(Ah) y_i + S_k(Ah) h b`` for ``i < m``, starting at ``x0``."""
    Ah = prob.A.data * params.h
    Tk = taylor_T(params.k, Ah)
    hb = taylor_S(params.k, Ah) @ (params.h * prob.b)
    ys = [prob.x0.copy()]
    for _ in range(params.m):
        ys.append(Tk @ ys[-1] + hb)
    return ys


def solve_quadratic_rk(F0, F1, F2, u_in, T: float, tol: float = 1e-10, samples: int = MIN_SAMPLES) -> Trajectory:
    """Integrate ``du/dt = F0 + F1 u + F2 (u kron u)`` with Dormand-Prince 5(4).

    Node values come from the adaptive integrator; the trajectory is resampled
    on ``samples`` uniform times through quintic Hermite dense output, using
    the exact second derivative ``u'' = F1 f + F2 (f kron u + u kron f)``.
    """
    F0 = np.asarray(F0, dtype=float).ravel()
    d = F0.size
    F1 = np.asarray(F1, dtype=float).reshape(d, d)
    F2 = np.asarray(F2, dtype=float)
    if F2.shape != (d, d * d):
        raise InputError(f"F2 must have shape ({d}, {d * d}), got {F2.shape}")
    u_in = np.asarray(u_in, dtype=float).ravel()
    if u_in.size != d:
        raise InputError("u_in dimension mismatch")
    if tol < 1e-12:
        raise InputError("tol must be at least 1e-12")
    if not (T > 0 and math.isfinite(T)):
        raise InputError("T must be finite and positive")
    ts, us, fs, status = kernels.integrate_quadratic(F0, F1, F2, u_in, float(T), tol, tol)
    if status != kernels.STATUS_OK:
        why = "step-size underflow" if status == kernels.STATUS_UNDERFLOW else "step limit reached"
        raise NumericError(f"integration failed: {why}", last_time=float(ts[-1]))
    if not np.all(np.isfinite(us)):
        raise NumericError("integration produced non-finite values", last_time=float(ts[-1]))
    gs = fs @ F1.T + np.stack([F2 @ (np.kron(f, u) + np.kron(u, f)) for u, f in zip(us, fs)])
    times = np.linspace(0.0, T, max(int(samples), MIN_SAMPLES))
    states = kernels.hermite_eval(ts, us, fs, times, gs)
    states[-1] = us[-1]

    def norm_at(s):
        return float(np.linalg.norm(kernels.hermite_eval(ts, us, fs, s, gs)[0]))

    return _make_trajectory(times, states, norm_at)


def riccati_roots(a: float, b: float, c: float) -> tuple[float, float]:
    """Roots ``r_- < r_+`` of ``a x^2 + b x + c``; requires a positive discriminant."""
    disc = b * b - 4 * a * c
    if disc <= 0:
        raise InputError(f"nonpositive discriminant {disc}: R >= 1 regime")
    s = math.sqrt(disc)
    return (-b - s) / (2 * a), (-b + s) / (2 * a)


def scalar_riccati_closed_form(a: float, b: float, c: float, x0: float, t: float) -> float:
    """Solution of ``dx/dt = a x^2 + b x + c`` for ``a > 0``, ``b < 0``, ``c >= 0``."""
    if a <= 0 or b >= 0 or c < 0:
        raise InputError("need a > 0, b < 0, c >= 0")
    rm, rp = riccati_roots(a, b, c)
    w = rp - rm
    if x0 == rm:
        return rm
    return w / (1.0 - math.exp(a * w * t) * (1.0 - w / (x0 - rm))) + rm

"""Bounds on ``||exp(At)||``: log-norm, Jordan, Schur, Kreiss, and the supremum ``C(A)``."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg
import scipy.optimize

from .linalg_core import (
    SpectralProfile,
    as_dense,
    eigvec_condition,
    log_norm,
    schur_departure,
    spectral_scalars,
)

N_GRID = 512
KREISS_GRID = 64
REFINE_RTOL = 1e-6
UNBOUNDED = 1e12
_INVPHI = (math.sqrt(5) - 1) / 2


@dataclass
class BoundCurve:
    grid: np.ndarray
    actual: np.ndarray
    mu_bound: np.ndarray
    schur_bound: np.ndarray
    jordan_bound: Optional[np.ndarray] = None
    kreiss_low: float = math.nan
    kreiss_high: float = math.nan
    mu: float = math.nan
    alpha: float = math.nan
    extras: dict = field(default_factory=dict)

    def bounds(self) -> dict:
        out = {"mu": self.mu_bound, "schur": self.schur_bound}
        if self.jordan_bound is not None:
            out["jordan"] = self.jordan_bound
        return out


def exp_norm(A: np.ndarray, t: float) -> float:
    return float(np.linalg.norm(scipy.linalg.expm(A * t), 2))


def exp_norm_curve(a, grid) -> np.ndarray:
    """``||exp(A t)||`` on an arbitrary grid of nonnegative times."""
    A = as_dense(a)
    return np.array([exp_norm(A, float(t)) for t in np.asarray(grid, dtype=float)])


def _golden_max(f, lo: float, hi: float, rtol: float) -> tuple[float, float]:
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    scale = max(abs(hi), 1e-300)
    while (b - a) > rtol * scale:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def c_of_a(a, T: float, n_grid: int = N_GRID, rtol: float = REFINE_RTOL) -> float:
    """``sup_{t in [0,T]} ||exp(A t)||``.

    Maximum over a uniform grid followed by golden-section refinement on the
    two cells around the grid argmax. The result is a lower bound on the true
    supremum that is exact on the grid.
    """
    return c_of_a_argmax(a, T, n_grid, rtol)[1]


def c_of_a_argmax(a, T: float, n_grid: int = N_GRID, rtol: float = REFINE_RTOL):
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    A = as_dense(a)
    if T == 0 or not np.any(A):
        return 0.0, 1.0
    grid = np.linspace(0.0, T, n_grid)
    # powers of one step propagator are cheaper than independent expm calls
    step = scipy.linalg.expm(A * grid[1])
    E = np.eye(A.shape[0], dtype=complex)
    vals = np.empty(n_grid)
    for i in range(n_grid):
        vals[i] = np.linalg.norm(E, 2)
        E = E @ step
    i = int(np.argmax(vals))
    best_t, best = grid[i], float(vals[i])
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n_grid - 1)]
    if hi > lo:
        t, v = _golden_max(lambda s: exp_norm(A, s), lo, hi, rtol)
        if v > best:
            best_t, best = t, v
    return float(best_t), max(best, 1.0)


def _kreiss_objective(A: np.ndarray, x: float, y: float) -> float:
    n = A.shape[0]
    s = np.linalg.svd((x + 1j * y) * np.eye(n) - A, compute_uv=False)[-1]
    if s == 0:
        return math.inf
    return x / s


def kreiss_constant(a, n_grid: int = KREISS_GRID) -> tuple[float, float]:
    """Lower estimate of the Kreiss constant and the resulting sandwich ``(K, e d K)``.

    Maximizes ``Re(z) / sigma_min(zI - A)`` over a log grid in ``Re(z)`` and a
    linear grid in ``Im(z)``, then refines locally with Nelder-Mead in
    ``(log Re z, Im z)``. Returns ``(inf, inf)`` when the search exceeds 1e12.
    """
    A = as_dense(a)
    n = A.shape[0]
    nrm = max(float(np.linalg.norm(A, 2)), 1e-12)
    xs = np.logspace(-4, math.log10(10 * nrm), n_grid)
    ys = np.linspace(-2 * nrm, 2 * nrm, n_grid)
    best, bx, by = -math.inf, xs[0], 0.0
    for x in xs:
        for y in ys:
            v = _kreiss_objective(A, x, y)
            if v > best:
                best, bx, by = v, x, y
    if best > UNBOUNDED:
        return math.inf, math.inf

    def neg(p):
        x = math.exp(p[0])
        if x > UNBOUNDED * nrm:
            return -best
        return -_kreiss_objective(A, x, p[1])

    res = scipy.optimize.minimize(
        neg,
        [math.log(bx), by],
        method="Nelder-Mead",
        options={"xatol": 1e-8, "fatol": 1e-12, "maxiter": 4000},
    )
    best = max(best, -float(res.fun))
    # the supremum is approached as Re(z) -> inf whenever the argmax sits on the upper edge
    if bx >= xs[-1] or math.exp(res.x[0]) >= xs[-1]:
        x = max(xs[-1], math.exp(res.x[0]))
        y = float(res.x[1]) if math.exp(res.x[0]) >= xs[-1] else by
        while x < UNBOUNDED * nrm:
            x *= 10
            v = _kreiss_objective(A, x, y)
            if v <= best * (1 + 1e-12):
                if v > best:
                    best = v
                break
            best = v
    if best > UNBOUNDED:
        return math.inf, math.inf
    return best, math.e * n * best


def exp_bound_jordan(kappa_V: float, alpha: float, beta: int, t: float) -> float:
    """``kappa_V e^{alpha t} beta max_{0<=r<beta} t^r/r!``; ``beta`` is caller-supplied."""
    if beta < 1:
        raise ValueError("beta must be a positive integer")
    poly = max(t**r / math.factorial(r) for r in range(beta))
    return kappa_V * math.exp(alpha * t) * beta * poly


def exp_bound_schur(nrm_N: float, alpha: float, d: int, t: float) -> float:
    """``p_{d-1}(||N|| t) e^{alpha t}`` with ``p_{d-1}(x) = sum_{j<d} x^j/j!``."""
    if nrm_N < 0:
        raise ValueError("||N|| must be nonnegative")
    x = nrm_N * t
    return math.exp(alpha * t) * sum(x**j / math.factorial(j) for j in range(d))


def exp_bound_mu(mu: float, t: float) -> float:
    return math.exp(mu * t)


def bound_report(
    a,
    T: float,
    beta_hint: Optional[int] = None,
    kappa_hint: Optional[float] = None,
    samples: int = 201,
) -> BoundCurve:
    """Evaluate every applicable bound next to the true ``||exp(At)||`` on ``[0, T]``.

    The Jordan bound needs the largest Jordan block size ``beta_hint`` and the
    condition number of the Jordan basis ``kappa_hint``. For ``beta_hint == 1``
    the eigenvector condition number is used when ``kappa_hint`` is omitted.
    """
    if T <= 0:
        raise ValueError("horizon must be positive")
    A = as_dense(a)
    d = A.shape[0]
    alpha, _, _ = spectral_scalars(A)
    mu = log_norm(A)
    nN = schur_departure(A)
    grid = np.linspace(0.0, T, samples)
    actual = exp_norm_curve(A, grid)
    mu_b = np.exp(mu * grid)
    schur_b = np.array([exp_bound_schur(nN, alpha, d, t) for t in grid])
    jordan_b = None
    kv = eigvec_condition(A)
    if kappa_hint is None and beta_hint == 1:
        kappa_hint = kv.kappa
    if beta_hint is not None and kappa_hint is not None:
        jordan_b = np.array([exp_bound_jordan(kappa_hint, alpha, beta_hint, t) for t in grid])
    klo, khi = kreiss_constant(A)
    return BoundCurve(
        grid=grid,
        actual=actual,
        mu_bound=mu_b,
        schur_bound=schur_b,
        jordan_bound=jordan_b,
        kreiss_low=klo,
        kreiss_high=khi,
        mu=mu,
        alpha=alpha,
        extras={"schur_departure": nN, "kappa_V": kv.kappa},
    )


def spectral_profile(a, T: float) -> SpectralProfile:
    """Collect every scalar spectral quantity of ``A`` with ``C(A)`` on ``[0, T]``."""
    A = as_dense(a)
    alpha, rho, nrm = spectral_scalars(A)
    kv = eigvec_condition(A)
    kreiss = kreiss_constant(A)[0]
    return SpectralProfile(
        alpha=alpha,
        mu=log_norm(A),
        rho=rho,
        op_norm=nrm,
        kappa_V=kv.kappa,
        schur_departure=schur_departure(A),
        kreiss=kreiss,
        c_of_a=c_of_a(A, T),
        horizon=T,
        diagonalizable=kv.kappa is not None,
    )

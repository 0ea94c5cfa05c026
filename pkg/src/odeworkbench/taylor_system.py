"""Truncated Taylor polynomials and the block linear systems built from them.

Layout of the stepping system ``L = I - N``: a time register of size ``m+p``,
a Taylor register of size ``k+1`` and the state register of size ``d``; the
flat index of ``(i, j, s)`` is ``(i (k+1) + j) d + s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapacityError, InputError, NumericError
from .linalg_core import ConditionEstimate, MatrixHandle, condition_estimate, mat_exp, op_norm

MAX_SYSTEM_DIM = 4_000_000
KAPPA_DENSE_LIMIT = 2048


def _identity_like(M):
    n = M.shape[0]
    return sp.identity(n, dtype=complex, format="csr") if sp.issparse(M) else np.eye(n, dtype=complex)


def _matrix(M):
    if sp.issparse(M):
        return sp.csr_matrix(M, dtype=complex)
    M = np.asarray(M, dtype=complex)
    return M.reshape(1, 1) if M.ndim == 0 else M


def taylor_T(k: int, M):
    """``T_k(M) = sum_{j=0}^{k} M^j / j!`` by Horner's rule."""
    M = _matrix(M)
    eye = _identity_like(M)
    r = eye
    for j in range(k, 0, -1):
        r = eye + (M @ r) / j
    return r


def taylor_S(k: int, M):
    """``S_k(M) = sum_{j=1}^{k} M^{j-1} / j!``; the zero matrix for ``k = 0``."""
    M = _matrix(M)
    eye = _identity_like(M)
    if k == 0:
        return eye * 0
    r = eye
    for j in range(k, 1, -1):
        r = eye + (M @ r) / j
    return r


def taylor_T_lk(l: int, k: int, M):
    """``T_{l,k}(M) = sum_{j=0}^{k-l} l! M^j / (l+j)!``."""
    if not 0 <= l <= k:
        raise InputError(f"need 0 <= l <= k, got l={l}, k={k}")
    M = _matrix(M)
    eye = _identity_like(M)
    r = eye
    for j in range(k, l, -1):
        r = eye + (M @ r) / j
    return r


def remainder_bound(k: int) -> float:
    """``e / (k+1)!``, valid when ``||Ah|| <= 1``."""
    return math.e / math.factorial(k + 1)


def remainder_actual(A, h: float, k: int) -> float:
    """``||e^{Ah} - T_k(Ah)||`` with the exponential as ground truth."""
    Ah = np.asarray(MatrixHandle.from_any(A).dense()) * h
    return float(np.linalg.norm(mat_exp(Ah) - taylor_T(k, Ah), 2))


def remainder_check(A, h: float, k: int) -> dict:
    """Remainder bound, actual remainder, and whether the bound's precondition holds."""
    applicable = op_norm(A) * h <= 1 + 1e-12
    return {
        "bound": remainder_bound(k) if applicable else None,
        "actual": remainder_actual(A, h, k),
        "applicable": applicable,
    }


@dataclass(frozen=True)
class SolverParams:
    h: float
    m: int
    p: int
    k: int
    delta: float = math.nan
    Omega: float = math.nan
    flags: tuple = ()

    def __post_init__(self):
        if not (self.h > 0 and math.isfinite(self.h)):
            raise InputError(f"step size must be positive, got {self.h}")
        for name in ("m", "p", "k"):
            if int(getattr(self, name)) < 1:
                raise InputError(f"{name} must be a positive integer")

    @property
    def T(self) -> float:
        return self.m * self.h

    def as_dict(self) -> dict:
        return {
            "h": self.h,
            "m": self.m,
            "p": self.p,
            "k": self.k,
            "delta": self.delta,
            "Omega": self.Omega,
            "flags": list(self.flags),
        }


@dataclass(frozen=True)
class BlockLayout:
    n_time: int
    n_taylor: int
    d: int

    @property
    def dim(self) -> int:
        return self.n_time * self.n_taylor * self.d

    @property
    def time_block(self) -> int:
        return self.n_taylor * self.d

    def index(self, i: int, j: int) -> slice:
        start = (i * self.n_taylor + j) * self.d
        return slice(start, start + self.d)

    def time_slice(self, i: int) -> slice:
        return slice(i * self.time_block, (i + 1) * self.time_block)

    def block(self, vec: np.ndarray, i: int, j: int = 0) -> np.ndarray:
        return vec[self.index(i, j)]


@dataclass
class TaylorSystem:
    L: sp.csr_matrix
    params: SolverParams
    layout: BlockLayout
    psi_in: Optional[np.ndarray] = None
    N_init: Optional[float] = None
    C_alt: Optional[sp.csr_matrix] = None
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> sp.csr_matrix:
        return sp.identity(self.L.shape[0], dtype=complex, format="csr") - self.L

    def solve(self, rhs: Optional[np.ndarray] = None) -> np.ndarray:
        """Exact solve of the unit lower-triangular system ``L y = rhs``."""
        rhs = self.psi_in if rhs is None else rhs
        return spla.spsolve_triangular(self.L, rhs.astype(complex), lower=True, unit_diagonal=True)


def build_M1(A, h: float, k: int) -> sp.csr_matrix:
    """``M_1 = sum_{j<k} |j+1><j| (x) Ah/(j+1)``, dimension ``(k+1) d``."""
    if k < 1:
        raise InputError("k must be >= 1")
    Ah = MatrixHandle.from_any(A).sparse() * h
    sub = sp.diags([1.0 / np.arange(1, k + 1)], [-1], shape=(k + 1, k + 1), dtype=complex)
    return sp.kron(sub, Ah, format="csr")


def build_M2(k: int, d: int) -> sp.csr_matrix:
    """``M_2 = sum_{j<=k} |0><j| (x) I``."""
    row = sp.csr_matrix((np.ones(k + 1), (np.zeros(k + 1, int), np.arange(k + 1))), shape=(k + 1, k + 1))
    return sp.kron(row, sp.identity(d, dtype=complex), format="csr")


def step_operator(A, h: float, k: int) -> sp.csr_matrix:
    """``M_2 (I - M_1)^{-1}`` with the inverse expanded as ``sum_{j<=k} M_1^j``."""
    d = MatrixHandle.from_any(A).dim
    M1 = build_M1(A, h, k)
    term = sp.identity(M1.shape[0], dtype=complex, format="csr")
    acc = term.copy()
    for _ in range(k):
        term = M1 @ term
        acc = acc + term
    out = build_M2(k, d) @ acc
    out.eliminate_zeros()
    return out.tocsr()


def _time_shift(n: int, rows: range) -> sp.csr_matrix:
    r = np.array([i + 1 for i in rows], dtype=int)
    c = np.array(list(rows), dtype=int)
    return sp.csr_matrix((np.ones(len(r)), (r, c)), shape=(n, n), dtype=complex)


def build_L(A, params: SolverParams, x0=None, b=None) -> TaylorSystem:
    """Assemble ``L = I - N`` for the truncated-Taylor stepping scheme.

    Steps ``0..m-1`` apply ``M_2 (I - M_1)^{-1}``; steps ``m..m+p-2`` copy the
    time block forward, so the solution holds ``y_0..y_m`` followed by
    ``p - 1`` further copies of ``y_m`` (time blocks ``m..m+p-1`` all equal ``y_m``).
    """
    h = MatrixHandle.from_any(A)
    m, p, k = params.m, params.p, params.k
    layout = BlockLayout(m + p, k + 1, h.dim)
    if layout.dim > MAX_SYSTEM_DIM:
        raise CapacityError(f"system dimension {layout.dim} exceeds limit {MAX_SYSTEM_DIM}")
    B = layout.time_block
    N = sp.kron(_time_shift(m + p, range(0, m)), step_operator(h, params.h, k))
    if p > 1:
        N = N + sp.kron(_time_shift(m + p, range(m, m + p - 1)), sp.identity(B, dtype=complex))
    L = (sp.identity(layout.dim, dtype=complex) - N).tocsr()
    L.eliminate_zeros()
    psi, n_init = (None, None)
    if x0 is not None:
        psi, n_init = build_psi_in(x0, b if b is not None else np.zeros(h.dim), params)
    return TaylorSystem(L=L, params=params, layout=layout, psi_in=psi, N_init=n_init)


def build_psi_in(x0, b, params: SolverParams) -> tuple[np.ndarray, float]:
    """``psi_in = |0,0,x0> + h sum_{i<m} |i,1,b>`` and its norm ``sqrt(|x0|^2 + m h^2 |b|^2)``."""
    x0 = np.asarray(x0, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    if x0.shape != b.shape:
        raise InputError(f"x0 and b dimensions differ: {x0.shape} vs {b.shape}")
    layout = BlockLayout(params.m + params.p, params.k + 1, x0.size)
    psi = np.zeros(layout.dim, dtype=complex)
    psi[layout.index(0, 0)] = x0
    for i in range(params.m):
        psi[layout.index(i, 1)] = params.h * b
    n_init = math.sqrt(np.vdot(x0, x0).real + params.m * params.h**2 * np.vdot(b, b).real)
    return psi, n_init


def apply_step(A, h: float, k: int, v: np.ndarray, d: int) -> np.ndarray:
    """Action of ``M_2 (I - M_1)^{-1}`` on one time block, without forming it.

    Forward substitution ``z_0 = v_0``, ``z_j = v_j + (Ah/j) z_{j-1}``; the
    result is ``sum_j z_j``.
    """
    z = v[:d].copy()
    acc = z.copy()
    for j in range(1, k + 1):
        z = v[j * d:(j + 1) * d] + (A @ z) * (h / j)
        acc += z
    return acc


def block_forward_solve(A, params: SolverParams, rhs: np.ndarray) -> np.ndarray:
    """Matrix-free solve of ``L y = rhs`` exploiting the block lower-bidiagonal time structure."""
    Ad = A.data if isinstance(A, MatrixHandle) else A
    if not sp.issparse(Ad):
        Ad = np.asarray(Ad, dtype=complex)
    d = Ad.shape[0]
    m, p, k = params.m, params.p, params.k
    layout = BlockLayout(m + p, k + 1, d)
    y = np.array(rhs, dtype=complex)
    for i in range(1, m + p):
        prev = y[layout.time_slice(i - 1)]
        cur = layout.time_slice(i)
        if i - 1 < m:
            y[cur.start:cur.start + d] += apply_step(Ad, params.h, k, prev, d)
        else:
            y[cur] += prev
    return y


def _forward_action(A, params: SolverParams, y: np.ndarray, adjoint: bool = False) -> np.ndarray:
    """``L y`` (or ``L^H y``) without assembling ``L``."""
    Ad = A.data if isinstance(A, MatrixHandle) else A
    d = Ad.shape[0]
    m, p, k = params.m, params.p, params.k
    layout = BlockLayout(m + p, k + 1, d)
    out = np.array(y, dtype=complex)
    if not adjoint:
        for i in range(1, m + p):
            prev = y[layout.time_slice(i - 1)]
            cur = layout.time_slice(i)
            if i - 1 < m:
                out[cur.start:cur.start + d] -= apply_step(Ad, params.h, k, prev, d)
            else:
                out[cur] -= prev
        return out
    AH = Ad.conj().T
    for i in range(0, m + p - 1):
        nxt = y[layout.time_slice(i + 1)]
        cur = layout.time_slice(i)
        if i < m:
            out[cur] -= _apply_step_adjoint(AH, params.h, k, nxt[:d], d)
        else:
            out[cur] -= nxt
    return out


def _apply_step_adjoint(AH, h, k, w, d):
    # adjoint of v -> sum_j z_j with z_j = v_j + (Ah/j) z_{j-1}: back substitution
    out = np.empty((k + 1) * d, dtype=complex)
    g = w.copy()
    out[k * d:(k + 1) * d] = g
    for j in range(k, 0, -1):
        g = w + (AH @ g) * (h / j)
        out[(j - 1) * d:j * d] = g
    return out


def _backward_solve(A, params: SolverParams, rhs: np.ndarray) -> np.ndarray:
    """Solve ``L^H y = rhs`` by back substitution over time blocks."""
    Ad = A.data if isinstance(A, MatrixHandle) else A
    d = Ad.shape[0]
    m, p, k = params.m, params.p, params.k
    layout = BlockLayout(m + p, k + 1, d)
    AH = Ad.conj().T
    y = np.array(rhs, dtype=complex)
    for i in range(m + p - 2, -1, -1):
        nxt = y[layout.time_slice(i + 1)]
        cur = layout.time_slice(i)
        if i < m:
            y[cur] += _apply_step_adjoint(AH, params.h, k, nxt[:d], d)
        else:
            y[cur] += nxt
    return y


def build_bcow_C(A, h: float, k: int, m: int, p: int, raw: bool = False) -> sp.csr_matrix:
    """Comparison system of the earlier truncated-Taylor construction.

    Index range ``0..m(k+1)+p``; Taylor couplings use ``(Ah)/j`` (literal ``A/j``
    with ``raw=True``); each step's ``k+1`` Taylor terms are summed into the
    first slot of the next step; the final ``p`` slots copy the previous one.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    H = MatrixHandle.from_any(A)
    d = H.dim
    Ah = H.sparse() * (1.0 if raw else h)
    D = m * (k + 1) + p
    n = D + 1
    eye = sp.identity(d, dtype=complex, format="csr")
    rows, cols, blocks = [], [], []
    for i in range(m):
        for j in range(1, k + 1):
            rows.append(i * (k + 1) + j)
            cols.append(i * (k + 1) + j - 1)
            blocks.append(Ah / j)
        for j in range(k + 1):
            rows.append((i + 1) * (k + 1))
            cols.append(i * (k + 1) + j)
            blocks.append(eye)
    for j in range(D - p + 1, D + 1):
        rows.append(j)
        cols.append(j - 1)
        blocks.append(eye)
    grid = [[None] * n for _ in range(n)]
    for r, c, blk in zip(rows, cols, blocks):
        grid[r][c] = blk if grid[r][c] is None else grid[r][c] + blk
    for i in range(n):
        grid[i][i] = eye if grid[i][i] is None else grid[i][i]
    off = sp.bmat(grid, format="csr", dtype=complex)
    # bmat placed identities on the diagonal and +blocks below; C = I - (lower part)
    lower = off - sp.identity(n * d, dtype=complex)
    C = (sp.identity(n * d, dtype=complex) - lower).tocsr()
    C.eliminate_zeros()
    return C


def kappa_of_system(S, dense_limit: int = KAPPA_DENSE_LIMIT) -> ConditionEstimate:
    """Condition number of an assembled (square) system; dense SVD or Lanczos."""
    if S.shape[0] != S.shape[1]:
        raise InputError(f"system must be square, got {S.shape}")
    est = condition_estimate(S, dense_limit=dense_limit)
    if math.isinf(est.kappa):
        raise NumericError(
            "system is numerically singular", sigma_max=est.sigma_max, sigma_min=est.sigma_min
        )
    return est


def kappa_of_taylor(A, params: SolverParams) -> ConditionEstimate:
    """Matrix-free condition number of ``L`` (iterative path)."""
    d = MatrixHandle.from_any(A).dim if not sp.issparse(A) else A.shape[0]
    Ad = A if sp.issparse(A) else MatrixHandle.from_any(A).dense()
    n = (params.m + params.p) * (params.k + 1) * d
    return condition_estimate(
        None,
        matvec=lambda y: _forward_action(Ad, params, y),
        rmatvec=lambda y: _forward_action(Ad, params, y, adjoint=True),
        solve=lambda y: block_forward_solve(Ad, params, y),
        rsolve=lambda y: _backward_solve(Ad, params, y),
        n=n,
    )

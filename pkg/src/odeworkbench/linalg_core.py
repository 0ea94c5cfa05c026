"""Dense/sparse complex linear-algebra kernels and scalar spectral quantities.

Everything here is a pure function of its inputs. Matrices may be passed as
numpy arrays, scipy sparse matrices or :class:`MatrixHandle` instances.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CapacityError, InputError, NumericError

DENSE_LIMIT = 4096
"""Largest dimension for which dense decompositions are attempted."""

SINGULAR_RTOL = 1e-14
DEFECTIVE_RTOL = 1e-13


@dataclass(frozen=True)
class MatrixHandle:
    """A square complex matrix stored densely or as CSR, with its sparsity pattern.

    ``row_sparsity`` / ``col_sparsity`` are the maximum number of nonzeros in
    any row / column.
    """

    data: object
    dim: int
    row_sparsity: int
    col_sparsity: int

    @classmethod
    def from_any(cls, a) -> "MatrixHandle":
        if isinstance(a, MatrixHandle):
            return a
        if sp.issparse(a):
            m = sp.csr_matrix(a, dtype=complex)
            m.eliminate_zeros()
            if m.shape[0] != m.shape[1]:
                raise InputError(f"matrix must be square, got shape {m.shape}")
            if not np.all(np.isfinite(m.data)):
                raise InputError("matrix has non-finite entries")
            rows = np.diff(m.indptr)
            cols = np.bincount(m.indices, minlength=m.shape[1])
        else:
            m = np.array(a, dtype=complex, copy=True)
            if m.ndim == 0:
                m = m.reshape(1, 1)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InputError(f"matrix must be square, got shape {m.shape}")
            if not np.all(np.isfinite(m)):
                raise InputError("matrix has non-finite entries")
            nz = m != 0
            rows = nz.sum(axis=1)
            cols = nz.sum(axis=0)
        n = m.shape[0]
        return cls(
            data=m,
            dim=n,
            row_sparsity=int(rows.max()) if n else 0,
            col_sparsity=int(cols.max()) if n else 0,
        )

    @property
    def is_sparse(self) -> bool:
        return sp.issparse(self.data)

    @property
    def sparsity(self) -> int:
        return max(self.row_sparsity, self.col_sparsity)

    def dense(self) -> np.ndarray:
        if self.is_sparse:
            _check_dense_capacity(self.dim)
            return self.data.toarray()
        return self.data

    def sparse(self) -> sp.csr_matrix:
        return self.data if self.is_sparse else sp.csr_matrix(self.data)


@dataclass(frozen=True)
class SpectralProfile:
    """Scalar spectral summary of one matrix over a horizon ``[0, horizon]``."""

    alpha: float
    mu: float
    rho: float
    op_norm: float
    kappa_V: Optional[float]
    schur_departure: float
    kreiss: float
    c_of_a: float
    horizon: float
    diagonalizable: bool = True

    def as_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "mu": self.mu,
            "rho": self.rho,
            "op_norm": self.op_norm,
            "kappa_V": self.kappa_V,
            "schur_departure": self.schur_departure,
            "kreiss": self.kreiss,
            "c_of_a": self.c_of_a,
            "horizon": self.horizon,
            "diagonalizable": self.diagonalizable,
        }


class ConditionEstimate(NamedTuple):
    kappa: float
    sigma_max: float
    sigma_min: float
    method: str  # "dense" or "iterative"


class EigvecCondition(NamedTuple):
    kappa: Optional[float]  # None when effectively non-diagonalizable
    status: str
    sigma_max: float
    sigma_min: float

    @property
    def estimate(self) -> float:
        """``sigma_max / sigma_min`` regardless of status (rounding-dominated when flagged)."""
        return self.sigma_max / self.sigma_min if self.sigma_min > 0 else math.inf


def _check_dense_capacity(n: int, limit: int = DENSE_LIMIT) -> None:
    if n > limit:
        raise CapacityError(f"dimension {n} exceeds dense limit {limit}")


def as_dense(a, limit: int = DENSE_LIMIT) -> np.ndarray:
    """Validate ``a`` and return it as a dense complex array."""
    h = MatrixHandle.from_any(a)
    _check_dense_capacity(h.dim, limit)
    return h.dense()


def mat_exp(a, t: float = 1.0) -> np.ndarray:
    """Matrix exponential ``e^{A t}`` (scaling and squaring with Pade core)."""
    if not (t >= 0 and math.isfinite(t)):
        raise InputError(f"time must be finite and nonnegative, got {t}")
    A = as_dense(a)
    return scipy.linalg.expm(A * t)


def phi1(a, t: float = 1.0) -> np.ndarray:
    """Integral ``int_0^t e^{A s} ds``, valid for singular ``A``.

    Read off the top-right block of ``exp([[A, I], [0, 0]] t)``.
    """
    if not (t >= 0 and math.isfinite(t)):
        raise InputError(f"time must be finite and nonnegative, got {t}")
    A = as_dense(a, DENSE_LIMIT // 2)
    n = A.shape[0]
    aug = np.zeros((2 * n, 2 * n), dtype=complex)
    aug[:n, :n] = A
    aug[:n, n:] = np.eye(n)
    return scipy.linalg.expm(aug * t)[:n, n:]


def log_norm(a) -> float:
    """Largest eigenvalue of the Hermitian part ``(A + A^H)/2``."""
    h = MatrixHandle.from_any(a)
    if h.is_sparse and h.dim > DENSE_LIMIT:
        S = (h.data + h.data.conj().T) * 0.5
        return float(spla.eigsh(S, k=1, which="LA", return_eigenvectors=False)[0])
    A = h.dense()
    return float(np.linalg.eigvalsh((A + A.conj().T) * 0.5)[-1])


def op_norm(a) -> float:
    """Spectral norm (largest singular value)."""
    h = MatrixHandle.from_any(a)
    if h.is_sparse and h.dim > DENSE_LIMIT:
        return _sigma_max_iterative(h.data)
    A = h.dense()
    if A.size == 0:
        return 0.0
    return float(np.linalg.norm(A, 2))


def spectral_scalars(a) -> tuple[float, float, float]:
    """Return ``(alpha, rho, op_norm)``: spectral abscissa, spectral radius, 2-norm."""
    A = as_dense(a)
    try:
        w = scipy.linalg.eigvals(A)
    except scipy.linalg.LinAlgError as exc:
        raise NumericError("eigenvalue solver did not converge", dim=A.shape[0]) from exc
    return float(w.real.max()), float(np.abs(w).max()), op_norm(A)


def _sigma_max_iterative(M, matvec=None, rmatvec=None, n=None, tol=1e-12) -> float:
    if matvec is None:
        n = M.shape[0]
        matvec, rmatvec = M.dot, M.conj().T.dot
    op = spla.LinearOperator((n, n), matvec=lambda x: rmatvec(matvec(x)), dtype=complex)
    lam = spla.eigsh(op, k=1, which="LA", tol=tol, return_eigenvectors=False)[0]
    return math.sqrt(max(lam.real, 0.0))


def _sigma_min_iterative(n, solve, rsolve, tol=1e-12) -> float:
    op = spla.LinearOperator((n, n), matvec=lambda x: solve(rsolve(x)), dtype=complex)
    lam = spla.eigsh(op, k=1, which="LA", tol=tol, return_eigenvectors=False)[0]
    return 1.0 / math.sqrt(lam.real)


def condition_estimate(
    m,
    *,
    dense_limit: int = DENSE_LIMIT,
    matvec=None,
    rmatvec=None,
    solve=None,
    rsolve=None,
    n: Optional[int] = None,
) -> ConditionEstimate:
    """2-norm condition number with the singular-value pair that produced it.

    Small matrices use a full SVD. Larger sparse matrices (or a matrix-free
    system given by ``matvec``/``rmatvec`` and ``solve``/``rsolve``, the
    actions of ``M``, ``M^H``, ``M^{-1}``, ``M^{-H}``) use Lanczos on
    ``M^H M`` and its inverse.
    """
    if matvec is None:
        h = MatrixHandle.from_any(m)
        n = h.dim
        if n <= dense_limit:
            s = np.linalg.svd(h.dense(), compute_uv=False)
            smax, smin = float(s[0]), float(s[-1])
            method = "dense"
        else:
            M = sp.csc_matrix(h.data)
            try:
                lu = spla.splu(M)
            except RuntimeError:
                smax = _sigma_max_iterative(M)
                return ConditionEstimate(math.inf, smax, 0.0, "iterative")
            smax = _sigma_max_iterative(M)
            smin = _sigma_min_iterative(n, lu.solve, lambda x: lu.solve(x, trans="H"))
            method = "iterative"
    else:
        smax = _sigma_max_iterative(None, matvec, rmatvec, n)
        smin = _sigma_min_iterative(n, solve, rsolve)
        method = "iterative"
    if smin <= SINGULAR_RTOL * smax:
        return ConditionEstimate(math.inf, smax, smin, method)
    return ConditionEstimate(smax / smin, smax, smin, method)


def condition_number(m, **kwargs) -> float:
    """``sigma_max / sigma_min``; ``inf`` when ``sigma_min < 1e-14 sigma_max``."""
    return condition_estimate(m, **kwargs).kappa


def normalized_eigenvectors(a) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs with unit 2-norm columns whose largest-modulus entry is real positive."""
    A = as_dense(a)
    w, V = scipy.linalg.eig(A)
    V = V / np.linalg.norm(V, axis=0)
    idx = np.argmax(np.abs(V), axis=0)
    piv = V[idx, np.arange(V.shape[1])]
    V = V * (np.abs(piv) / piv)
    return w, V


def eigvec_condition(a) -> EigvecCondition:
    """Condition number of the (normalized) eigenvector matrix ``V``.

    Returns ``kappa=None`` with status ``"effectively non-diagonalizable"`` when
    ``sigma_min(V) < 1e-13 sigma_max(V)``.
    """
    _, V = normalized_eigenvectors(a)
    s = np.linalg.svd(V, compute_uv=False)
    smax, smin = float(s[0]), float(s[-1])
    if smin < DEFECTIVE_RTOL * smax:
        return EigvecCondition(None, "effectively non-diagonalizable", smax, smin)
    return EigvecCondition(smax / smin, "diagonalizable", smax, smin)


def schur_factor(a) -> tuple[np.ndarray, np.ndarray]:
    """Complex Schur form ``A = U T U^H``; returns ``(T, U)``."""
    A = as_dense(a)
    try:
        T, U = scipy.linalg.schur(A, output="complex")
    except scipy.linalg.LinAlgError as exc:
        raise NumericError("Schur decomposition did not converge", dim=A.shape[0]) from exc
    return T, U


def schur_departure(a, ord=2) -> float:
    """Norm of the strictly upper-triangular part ``N`` of a computed Schur form.

    The Schur form is not unique and no minimization over orderings is done,
    so this is an upper proxy for the smallest attainable ``||N||``. Any Schur
    form still gives a valid exponential bound.
    """
    T, _ = schur_factor(a)
    N = np.triu(T, 1)
    if N.size == 0:
        return 0.0
    return float(np.linalg.norm(N, ord))

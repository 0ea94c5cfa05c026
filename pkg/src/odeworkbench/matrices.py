"""Reference matrices and seeded random generators used by tests and sweeps."""

from __future__ import annotations

import numpy as np
import scipy.stats


def fig1_pair() -> tuple[np.ndarray, np.ndarray]:
    """Upper-triangular pair with a double eigenvalue -2.

    The first has positive log-norm (transient growth), the second negative.
    """
    A = np.array([[-2.0, 10.0], [0.0, -2.0]], dtype=complex)
    B = np.array([[-2.0, 1.0], [0.0, -2.0]], dtype=complex)
    return A, B


def twisted_toeplitz(d: int) -> np.ndarray:
    """Tridiagonal twisted-Toeplitz matrix with diagonal ``-j/d`` and off-diagonals ``i j/d``.

    Its Hermitian part is ``diag(-1, ..., -d)/d`` so the log-norm is ``-1/d``,
    while the eigenvector matrix becomes exponentially ill-conditioned in ``d``.
    """
    j = np.arange(1, d + 1)
    A = np.diag(-j.astype(complex))
    off = 1j * j[:-1]
    A[np.arange(d - 1), np.arange(1, d)] = off
    A[np.arange(1, d), np.arange(d - 1)] = off
    return A / d


def random_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    return scipy.stats.unitary_group.rvs(d, random_state=rng)


def random_complex(d: int, rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    return scale * (rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))) / np.sqrt(2 * d)


def random_stable(d: int, rng: np.random.Generator, abscissa: float = -0.5) -> np.ndarray:
    """Random complex matrix shifted so its spectral abscissa equals ``abscissa``."""
    G = random_complex(d, rng)
    alpha = np.linalg.eigvals(G).real.max()
    return G - (alpha - abscissa) * np.eye(d)


def random_normal_stable(d: int, rng: np.random.Generator) -> np.ndarray:
    """Normal matrix ``U diag(lambda) U^H`` with ``Re(lambda) < 0``."""
    lam = -rng.uniform(0.2, 2.0, d) + 1j * rng.uniform(-2.0, 2.0, d)
    U = random_unitary(d, rng)
    return U @ np.diag(lam) @ U.conj().T


def random_hermitian_negdef(d: int, rng: np.random.Generator) -> np.ndarray:
    G = random_complex(d, rng)
    return -(G @ G.conj().T) - 0.1 * np.eye(d)

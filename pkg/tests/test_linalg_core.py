import math

import mpmath
import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from odeworkbench.errors import CapacityError, InputError
from odeworkbench.linalg_core import (
    MatrixHandle,
    condition_estimate,
    condition_number,
    eigvec_condition,
    log_norm,
    mat_exp,
    op_norm,
    phi1,
    schur_departure,
    schur_factor,
    spectral_scalars,
)
from odeworkbench.matrices import fig1_pair, random_unitary, twisted_toeplitz


def series_exp(A, t, terms=60, dps=50):
    """Truncated power series in mpmath extended precision."""
    with mpmath.workdps(dps):
        M = mpmath.matrix(A.tolist()) * t
        out = mpmath.eye(A.shape[0])
        term = mpmath.eye(A.shape[0])
        for j in range(1, terms + 1):
            term = term * M / j
            out += term
        return np.array(out.tolist(), dtype=complex)


class TestMatExp:
    def test_zero_matrix_gives_identity(self):
        for d in (1, 3, 7):
            assert np.array_equal(mat_exp(np.zeros((d, d)), 7.0), np.eye(d))

    def test_diagonal(self):
        np.testing.assert_allclose(mat_exp(np.diag([-2.0, -2.0]), 1.0), math.exp(-2) * np.eye(2), rtol=1e-14)

    def test_nonnormal_against_series(self):
        A, _ = fig1_pair()
        ref = series_exp(A.real, 1.0)
        np.testing.assert_allclose(mat_exp(A, 1.0), ref, rtol=1e-12, atol=1e-14)

    def test_rejects_nonfinite(self):
        with pytest.raises(InputError):
            mat_exp(np.array([[np.nan]]))

    def test_rejects_negative_time(self):
        with pytest.raises(InputError):
            mat_exp(np.eye(2), -1.0)

    def test_capacity(self):
        with pytest.raises(CapacityError):
            mat_exp(sp.identity(5000, format="csr"))

    @settings(max_examples=30, deadline=None)
    @given(arrays(np.float64, (3, 3), elements=st.floats(-2, 2)), st.floats(0, 2))
    def test_semigroup(self, A, t):
        np.testing.assert_allclose(mat_exp(A, 2 * t), mat_exp(A, t) @ mat_exp(A, t), rtol=1e-10, atol=1e-10)


class TestPhi1:
    def test_zero(self):
        np.testing.assert_allclose(phi1(np.zeros((2, 2)), 3.0), 3 * np.eye(2))

    def test_scalar(self):
        assert phi1(np.array([[-1.0]]), 1.0)[0, 0].real == pytest.approx(1 - math.exp(-1), rel=1e-14)

    def test_nilpotent(self):
        np.testing.assert_allclose(phi1(np.array([[0.0, 1.0], [0.0, 0.0]]), 2.0), [[2, 2], [0, 2]], atol=1e-14)


class TestNorms:
    def test_log_norm_examples(self):
        A, B = fig1_pair()
        assert log_norm(B) == pytest.approx(-1.5, abs=1e-14)
        assert log_norm(A) == pytest.approx(3.0, abs=1e-13)

    @pytest.mark.parametrize("d", [10, 20, 37])
    def test_log_norm_twisted(self, d):
        assert log_norm(twisted_toeplitz(d)) == pytest.approx(-1.0 / d, abs=1e-13)

    def test_log_norm_finite_difference(self, rng):
        for _ in range(5):
            A = rng.standard_normal((4, 4))
            A *= 5.0 / np.linalg.norm(A, 2)
            dt = 1e-6
            fd = (np.linalg.norm(mat_exp(A, dt), 2) - 1) / dt
            assert fd == pytest.approx(log_norm(A), abs=1e-3)

    def test_scalars_fig1(self):
        for M in fig1_pair():
            alpha, rho, _ = spectral_scalars(M)
            assert alpha == pytest.approx(-2.0, abs=1e-12)
            assert rho == pytest.approx(2.0, abs=1e-12)

    def test_identity(self):
        assert spectral_scalars(np.eye(3)) == pytest.approx((1.0, 1.0, 1.0))

    def test_op_norm_power_iteration(self, rng):
        A = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        v = rng.standard_normal(8)
        for _ in range(5000):
            v = A.conj().T @ (A @ v)
            v /= np.linalg.norm(v)
        oracle = np.linalg.norm(A @ v)
        assert op_norm(A) == pytest.approx(oracle, rel=1e-8)

    def test_op_norm_large_sparse(self, rng):
        n = 5000
        M = sp.diags([rng.uniform(0.1, 1.0, n)], [0], format="csr")
        M[17, 17] = 3.0
        assert op_norm(M) == pytest.approx(3.0, rel=1e-9)


class TestConditionNumber:
    def test_unitary(self, rng):
        assert condition_number(random_unitary(6, rng)) == pytest.approx(1.0, abs=1e-12)

    def test_diag(self):
        assert condition_number(np.diag([2.0, 0.5])) == pytest.approx(4.0, rel=1e-14)

    def test_svd_oracle(self, rng):
        A = rng.standard_normal((50, 50))
        s = np.linalg.svd(A, compute_uv=False)
        assert condition_number(A) == pytest.approx(s[0] / s[-1], rel=1e-8)

    def test_iterative_path(self, rng):
        A = rng.standard_normal((60, 60)) + 8 * np.eye(60)
        s = np.linalg.svd(A, compute_uv=False)
        est = condition_estimate(sp.csr_matrix(A), dense_limit=10)
        assert est.method == "iterative"
        assert est.kappa == pytest.approx(s[0] / s[-1], rel=1e-8)

    def test_singular_is_inf(self):
        est = condition_estimate(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert est.kappa == math.inf
        assert est.sigma_max == pytest.approx(1.0)


class TestEigvecCondition:
    def test_normal(self):
        assert eigvec_condition(np.diag([-1.0, -2.0])).kappa == pytest.approx(1.0, abs=1e-14)

    def test_hermitian_negdef(self, rng):
        X = rng.standard_normal((7, 7)) + 1j * rng.standard_normal((7, 7))
        H = -(X @ X.conj().T) - np.eye(7)
        assert eigvec_condition(H).kappa == pytest.approx(1.0, abs=1e-8)

    def test_twisted_d10(self):
        assert eigvec_condition(twisted_toeplitz(10)).kappa == pytest.approx(17.5352873756155, rel=1e-3)

    def test_defective_flagged(self):
        ev = eigvec_condition(np.array([[1.0, 1.0], [0.0, 1.0]]))
        assert ev.kappa is None
        assert ev.status == "effectively non-diagonalizable"
        assert ev.estimate > 1e13


class TestSchur:
    def test_normal_zero(self, rng):
        U = random_unitary(5, rng)
        A = U @ np.diag(rng.standard_normal(5)) @ U.conj().T
        assert schur_departure(A) == pytest.approx(0.0, abs=1e-12)

    def test_upper_triangular(self):
        A, _ = fig1_pair()
        assert schur_departure(A) == pytest.approx(10.0, rel=1e-12)

    def test_frobenius_identity(self, rng):
        A = rng.standard_normal((6, 6))
        T, U = schur_factor(A)
        np.testing.assert_allclose(U @ T @ U.conj().T, A, atol=1e-12)
        lam = np.linalg.eigvals(A)
        expect = math.sqrt(np.linalg.norm(A, "fro") ** 2 - np.sum(np.abs(lam) ** 2))
        assert schur_departure(A, ord="fro") == pytest.approx(expect, rel=1e-8)


class TestMatrixHandle:
    def test_sparsity(self):
        h = MatrixHandle.from_any(twisted_toeplitz(8))
        assert h.sparsity == 3 and h.dim == 8  # tridiagonal

    def test_rejects_rectangular(self):
        with pytest.raises(InputError):
            MatrixHandle.from_any(np.zeros((2, 3)))

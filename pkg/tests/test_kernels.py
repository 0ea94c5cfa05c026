"""Compiled and pure-Python RK kernels must agree."""

import numpy as np
import pytest

from odeworkbench import _fallback, kernels

_kernels = pytest.importorskip("odeworkbench._kernels")


def systems(rng):
    yield np.array([0.05]), np.array([[-1.0]]), np.array([[0.2]]), np.array([0.5]), 5.0
    for d in (2, 3):
        F1 = -2 * np.eye(d) + 0.3 * rng.standard_normal((d, d))
        yield 0.05 * rng.standard_normal(d), F1, 0.05 * rng.standard_normal((d, d * d)), 0.3 * rng.standard_normal(d), 2.0


def test_backend_selected():
    assert kernels.BACKEND == "compiled"


def test_agree(rng):
    for F0, F1, F2, u0, T in systems(rng):
        a = _fallback.integrate_quadratic(F0, F1, F2, u0, T, 1e-10, 1e-10)
        b = _kernels.integrate_quadratic(F0, F1, F2, u0, T, 1e-10, 1e-10)
        assert a[3] == b[3] == kernels.STATUS_OK
        # same step sequence; step sizes differ only by amplified rounding
        assert len(a[0]) == len(b[0])
        np.testing.assert_allclose(a[0], b[0], rtol=1e-8)
        assert a[0][-1] == b[0][-1] == T
        np.testing.assert_allclose(a[1][-1], b[1][-1], atol=1e-10)


def test_underflow_status():
    args = (np.zeros(1), np.zeros((1, 1)), np.ones((1, 1)), np.ones(1), 2.0, 1e-10, 1e-10)
    for impl in (_fallback, _kernels):
        ts, _, _, status = impl.integrate_quadratic(*args)
        assert status != kernels.STATUS_OK
        assert 0.9 < ts[-1] <= 1.0


def test_step_limit():
    args = (np.zeros(1), -np.eye(1), np.zeros((1, 1)), np.ones(1), 100.0, 1e-10, 1e-10)
    for impl in (_fallback, _kernels):
        *_, status = impl.integrate_quadratic(*args, max_steps=5)
        assert status == kernels.STATUS_MAX_STEPS


def test_rhs():
    u = np.array([1.0, 2.0])
    F2 = np.arange(8.0).reshape(2, 4)
    np.testing.assert_allclose(kernels.quadratic_rhs(np.ones(2), np.eye(2), F2, u), np.ones(2) + u + F2 @ np.kron(u, u))

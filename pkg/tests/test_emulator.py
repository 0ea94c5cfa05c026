import math

import numpy as np
import pytest

from odeworkbench.emulator import (
    BoundCheck,
    _check,
    choose_params,
    cost_model,
    emulate,
    factorial_condition,
    theorem_compliant,
    verify_truncation_lemmas,
)
from odeworkbench.errors import InputError
from odeworkbench.matrices import fig1_pair, random_stable, twisted_toeplitz
from odeworkbench.ode_reference import LinearProblem, exact_linear_solution
from odeworkbench.taylor_system import SolverParams

E3 = math.e**3


def smallest_k(m, delta, ratio, k0):
    """Exact integer factorial scan, independent of the lgamma test in the library."""
    k = k0
    while math.factorial(k + 1) < (m * E3 / delta) * ratio:
        k += 1
    return k


class TestBoundCheck:
    def test_slack_and_verdicts(self):
        c = _check("x", 2.0, 1.0)
        assert c.passed and c.slack == 2.0 and c.as_dict()["verdict"] == "pass"
        c = _check("y", 2.0, 1.0, relation=">=")
        assert not c.passed and c.as_dict()["verdict"] == "fail"

    def test_inapplicable_reported_na(self):
        c = _check("z", 1.0, 5.0, applicable=False, note="precondition")
        assert c.passed
        assert c.as_dict()["verdict"] == "n/a"

    def test_rtol(self):
        assert _check("r", 1.0, 1.0 + 1e-10, rtol=1e-9).passed
        assert not _check("r", 1.0, 1.0 + 1e-8, rtol=1e-9).passed


class TestChooseParams:
    @pytest.mark.parametrize("eps,expect_k", [(1e-2, 7), (1e-3, 9)])
    def test_worked_example(self, eps, expect_k):
        # T ||A|| = 10, b = 0
        A = -np.eye(2) * 10.0
        prob = LinearProblem(A, np.zeros(2), [1.0, 0.0], 1.0, eps)
        P = choose_params(prob)
        assert (P.m, P.p) == (10, 10)
        assert P.h == pytest.approx(0.1)
        assert P.Omega == pytest.approx(10 * E3)
        k0 = math.ceil(2 * math.log(10 * E3) / math.log(math.log(10 * E3)))
        assert k0 == 7
        assert P.k == smallest_k(10, eps / 2, 1.0, k0) == expect_k

    def test_zero_matrix_clamped(self):
        prob = LinearProblem(np.zeros((1, 1)), [0.0], [1.0], 2.0)
        P = choose_params(prob)
        assert P.m == P.p == 1
        assert "m_clamped" in P.flags and "k_floor" in P.flags
        assert P.k >= 3

    def test_forcing_raises_k(self):
        A = -np.eye(1)
        k_plain = choose_params(LinearProblem(A, [0.0], [1.0], 3.0)).k
        k_forced = choose_params(LinearProblem(A, [5.0], [1.0], 3.0)).k
        assert k_forced >= k_plain

    def test_factorial_condition_matches_exact(self):
        for m in (1, 3, 10):
            for k in range(1, 15):
                exact = math.factorial(k + 1) >= (m * E3 / 1e-3) * (1 + 2 * math.e**2 * 0.5 / 2.0)
                assert factorial_condition(m, k, 1e-3, 2.0, 0.5, 2.0) == exact

    def test_zero_final_state(self):
        prob = LinearProblem(np.zeros((1, 1)), [0.0], [0.0], 1.0)
        with pytest.raises(InputError):
            choose_params(prob)


class TestEmulate:
    def test_zero_problem(self):
        prob = LinearProblem(np.zeros((2, 2)), np.zeros(2), [1.0, 2.0], 1.0)
        res = emulate(prob)
        np.testing.assert_allclose(res.y_m, [1.0, 2.0])
        assert res.rel_error == 0.0
        P = res.params
        assert res.p_meas == pytest.approx(P.p / (P.m + P.p), abs=1e-15)
        assert res.p_meas == pytest.approx(0.5)
        assert res.passed

    def test_high_accuracy(self, rng):
        A = random_stable(4, rng)
        prob = LinearProblem(A, rng.standard_normal(4), rng.standard_normal(4), 1.5, 1e-6)
        res = emulate(prob)
        assert res.output_state_error <= 1e-6
        assert res.passed, [c for c in res.bound_checks if not c.passed]

    def test_solvers_agree(self, rng):
        A = random_stable(3, rng)
        prob = LinearProblem(A, rng.standard_normal(3), rng.standard_normal(3), 2.0, 1e-4)
        a = emulate(prob, solver="blocks", compute_kappa=False)
        b = emulate(prob, solver="sparse", compute_kappa=False)
        np.testing.assert_allclose(a.y, b.y, atol=1e-12)

    def test_p_meas_consistency(self, rng):
        A = random_stable(3, rng)
        b = rng.standard_normal(3)
        prob = LinearProblem(A, b, rng.standard_normal(3), 2.0, 1e-3)
        res = emulate(prob, compute_kappa=False)
        P = res.params
        y = res.y
        d = prob.d
        blk = (P.k + 1) * d
        solution_blocks = [y[i * blk:i * blk + d] for i in range(P.m + P.p)]
        total = sum(np.vdot(v, v).real for v in solution_blocks) + P.m * P.h**2 * np.vdot(b, b).real
        expect = P.p * np.vdot(res.y_m, res.y_m).real / total
        assert res.p_meas == pytest.approx(expect, rel=1e-12)

    def test_unknown_solver(self):
        prob = LinearProblem(-np.eye(1), [0.0], [1.0], 1.0)
        with pytest.raises(InputError):
            emulate(prob, solver="magic")

    def test_noncompliant_params_inapplicable(self, rng):
        A = random_stable(2, rng)
        prob = LinearProblem(A, np.zeros(2), [1.0, 1.0], 1.0)
        P = SolverParams(h=1.0, m=1, p=1, k=1, delta=0.005)
        res = emulate(prob, P)
        sol = next(c for c in res.bound_checks if c.name == "solution_error")
        ok, _ = theorem_compliant(prob, P, float(np.linalg.norm(res.x_T)))
        assert not ok and not sol.applicable and sol.as_dict()["verdict"] == "n/a"

    def test_user_lower_bound_mode(self, rng):
        A = random_stable(2, rng)
        prob = LinearProblem(A, np.zeros(2), [1.0, 0.0], 1.0, 1e-3)
        xT = float(np.linalg.norm(exact_linear_solution(prob, 1.0)))
        honest = emulate(prob, xT_norm_estimate=0.5 * xT, compute_kappa=False)
        assert honest.params.k >= choose_params(prob).k
        assert honest.rel_error <= prob.eps / 2


class TestConditionAndProbability:
    def test_zero_matrix_m1(self):
        prob = LinearProblem(np.zeros((1, 1)), [0.0], [1.0], 1.0)
        # k = 7 is the first order with (k+1)! >= e^3 / delta
        P = SolverParams(h=1.0, m=1, p=1, k=7, delta=0.005)
        res = emulate(prob, P)
        assert res.c_of_a == 1.0
        cond = next(c for c in res.bound_checks if c.name == "condition_number")
        assert math.isfinite(res.kappa_L) and cond.passed and cond.applicable
        prob_c = next(c for c in res.bound_checks if c.name == "prob_success")
        assert prob_c.actual == pytest.approx(0.5) and prob_c.bound == pytest.approx(1 / 18)

    def test_decaying(self):
        _, B = fig1_pair()
        prob = LinearProblem(B, np.zeros(2), [0.0, 1.0], 3.0)
        res = emulate(prob)
        assert all(c.passed for c in res.bound_checks)


class TestTruncationLemmas:
    def test_zero_matrix(self):
        checks = verify_truncation_lemmas(np.zeros((2, 2)), SolverParams(h=0.5, m=2, p=2, k=3, delta=0.01))
        for c in checks:
            if c.name.startswith("lemma") or c.name.startswith("identity"):
                assert c.actual == pytest.approx(0.0, abs=1e-15), c.name

    def test_twisted_d10_k8(self):
        A = twisted_toeplitz(10)
        base = choose_params(LinearProblem(A, np.zeros(10), np.ones(10), 1.0))
        P = SolverParams(h=base.h, m=base.m, p=base.p, k=8, delta=base.delta)
        checks = verify_truncation_lemmas(A, P)
        names = {c.name for c in checks}
        assert {"lemma_l0", "lemma_l1", "lemma_L0", "lemma_L1"} <= names
        for c in checks:
            assert c.applicable and c.passed, c

    def test_random_sweep(self, rng):
        for _ in range(100):
            d = int(rng.integers(1, 4))
            A = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
            h = rng.uniform(0.2, 1.0) / np.linalg.norm(A, 2)
            P = SolverParams(h=h, m=int(rng.integers(1, 5)), p=1, k=int(rng.integers(4, 10)), delta=0.01)
            for c in verify_truncation_lemmas(A, P):
                assert c.passed, c

    def test_inapplicable_when_step_too_large(self):
        P = SolverParams(h=1.0, m=1, p=1, k=3, delta=0.01)
        checks = {c.name: c for c in verify_truncation_lemmas(np.array([[-5.0]]), P)}
        assert not checks["lemma_l0"].applicable
        assert checks["identity_AL1"].applicable and checks["identity_AL1"].passed


class TestCostModel:
    def setup_method(self):
        _, B = fig1_pair()
        self.prob = LinearProblem(B, np.zeros(2), [1.0, 0.0], 1.0, 1e-2)
        self.P = SolverParams(h=0.5, m=2, p=2, k=10, delta=5e-3)

    def test_query_factor(self):
        c = cost_model(self.P, None, 1.0, self.prob, 50.0)
        assert c.components["s"] == 2
        assert c.query_factor == 1000.0
        assert c.polylog_args == {"k": 10, "m": 2, "d": 2, "kappa_L": 50.0, "inv_eps": 100.0}

    def test_eps_halved_only_log_changes(self):
        a = cost_model(self.P, None, 1.0, self.prob, 50.0)
        half = LinearProblem(self.prob.A, self.prob.b, self.prob.x0, 1.0, 5e-3)
        b = cost_model(self.P, None, 1.0, half, 50.0)
        assert a.query_factor == b.query_factor and a.main_factor == b.main_factor
        assert b.polylog_factor > a.polylog_factor
        diff = {k for k in a.polylog_args if a.polylog_args[k] != b.polylog_args[k]}
        assert diff == {"inv_eps"}

    def test_unit_c_of_a(self):
        g = 1.7
        c = cost_model(self.P, None, g, self.prob, 50.0)
        assert c.components["C_A"] == pytest.approx(1.0, abs=1e-12)
        assert c.main_factor == pytest.approx(g * 1.0 * np.linalg.norm(self.prob.A.dense(), 2), rel=1e-12)

    def test_monotone(self):
        base = cost_model(self.P, None, 1.0, self.prob, 50.0)
        more_k = cost_model(SolverParams(h=0.5, m=2, p=2, k=11, delta=5e-3), None, 1.0, self.prob, 50.0)
        more_kappa = cost_model(self.P, None, 1.0, self.prob, 60.0)
        more_g = cost_model(self.P, None, 2.0, self.prob, 50.0)
        assert more_k.query_factor > base.query_factor and more_k.polylog_factor > base.polylog_factor
        assert more_kappa.query_factor > base.query_factor
        assert more_g.main_factor > base.main_factor and more_g.query_factor == base.query_factor


def test_boundcheck_is_namedtuple():
    assert BoundCheck._fields[:4] == ("name", "bound", "actual", "passed")


def test_rtol_loosens_negative_bounds():
    assert _check("neg", -1.0, -1.0 + 1e-13, rtol=1e-12).passed
    assert _check("neg", -1.0, -1.0 - 1e-13, relation=">=", rtol=1e-12).passed


def test_infinite_bound_passes():
    assert _check("inf", float("inf"), 0.0).passed
    assert _check("inf", float("inf"), 3.0, rtol=1e-9).passed

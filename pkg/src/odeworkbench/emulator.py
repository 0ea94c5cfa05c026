"""Classical emulation of the truncated-Taylor linear-ODE algorithm and its bound checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
import scipy.linalg

from .errors import InputError, NumericError
from .linalg_core import ConditionEstimate, SpectralProfile, op_norm
from .ode_reference import LinearProblem, Trajectory, exact_linear_solution, linear_trajectory
from .spectral_bounds import c_of_a
from .taylor_system import (
    BlockLayout,
    SolverParams,
    block_forward_solve,
    build_L,
    build_psi_in,
    kappa_of_system,
    kappa_of_taylor,
    step_operator,
    taylor_S,
    taylor_T,
)

E = math.e
K_FLOOR = 3
KAPPA_DENSE_DIM = 1024
"""Above this system dimension kappa_L comes from the matrix-free Lanczos path."""


class BoundCheck(NamedTuple):
    name: str
    bound: float
    actual: float
    passed: bool
    applicable: bool = True
    relation: str = "<="
    note: str = ""

    @property
    def slack(self) -> float:
        """Ratio by which the bound is satisfied (>1 means room to spare)."""
        if self.relation == "<=":
            return self.bound / self.actual if self.actual > 0 else math.inf
        return self.actual / self.bound if self.bound > 0 else math.inf

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "bound": self.bound,
            "actual": self.actual,
            "relation": self.relation,
            "slack": self.slack,
            "applicable": self.applicable,
            "verdict": "n/a" if not self.applicable else ("pass" if self.passed else "fail"),
            "note": self.note,
        }


def _check(name, bound, actual, relation="<=", applicable=True, note="", rtol=0.0) -> BoundCheck:
    # relative slack measured from |bound| so that negative bounds are loosened too
    tol = rtol * abs(bound) if rtol else 0.0
    if relation == "<=":
        ok = actual <= bound + tol
    else:
        ok = actual >= bound - tol
    # an inapplicable check never fails; it is reported as such
    return BoundCheck(name, float(bound), float(actual), bool(ok) or not applicable, applicable, relation, note)


@dataclass(frozen=True)
class QueryCost:
    query_factor: float
    main_factor: float
    polylog_args: dict
    main_polylog_args: dict
    polylog_factor: float
    components: dict

    def as_dict(self) -> dict:
        return {
            "query_factor": self.query_factor,
            "main_factor": self.main_factor,
            "polylog_args": dict(self.polylog_args),
            "main_polylog_args": dict(self.main_polylog_args),
            "polylog_factor": self.polylog_factor,
            "components": dict(self.components),
        }


@dataclass
class EmulationResult:
    params: SolverParams
    y: np.ndarray
    y_blocks: list
    y_m: np.ndarray
    x_T: np.ndarray
    rel_error: float
    output_state_error: float
    p_meas: float
    g: float
    kappa_L: float
    kappa_method: str
    c_of_a: float
    bound_checks: list = field(default_factory=list)
    cost: Optional[QueryCost] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.bound_checks)

    def as_dict(self) -> dict:
        return {
            "params": self.params.as_dict(),
            "rel_error": self.rel_error,
            "output_state_error": self.output_state_error,
            "p_meas": self.p_meas,
            "g": self.g,
            "kappa_L": self.kappa_L,
            "kappa_method": self.kappa_method,
            "c_of_a": self.c_of_a,
            "y_m": _cplx_list(self.y_m),
            "x_T": _cplx_list(self.x_T),
            "bound_checks": [c.as_dict() for c in self.bound_checks],
            "cost": self.cost.as_dict() if self.cost else None,
        }


def _cplx_list(v):
    v = np.asarray(v)
    if np.all(v.imag == 0):
        return [float(x) for x in v.real]
    return [[float(x.real), float(x.imag)] for x in v]


def factorial_condition(m: int, k: int, delta: float, T: float, b_norm: float, xT_norm: float) -> bool:
    """``(k+1)! >= (m e^3 / delta)(1 + T e^2 ||b|| / ||x_T||)``."""
    rhs = (m * E**3 / delta) * (1 + T * E**2 * b_norm / xT_norm)
    return math.lgamma(k + 2) >= math.log(rhs)


def choose_params(prob: LinearProblem, xT_norm_estimate: Optional[float] = None) -> SolverParams:
    """Step size, step counts and truncation order for a target error ``prob.eps``.

    ``xT_norm_estimate`` defaults to the exactly computed ``||x(T)||``; pass a
    lower bound to avoid using the answer to choose the parameters.
    """
    flags = []
    T = prob.T
    tA = T * op_norm(prob.A)
    m = math.ceil(tA)
    if m < 1:
        m = 1
        flags.append("m_clamped")
    h = T / m
    delta = prob.eps / 2
    xT = xT_norm_estimate
    if xT is None:
        xT = float(np.linalg.norm(exact_linear_solution(prob, T)))
    if not xT > 0:
        raise InputError("||x(T)|| must be positive to choose parameters")
    b_norm = float(np.linalg.norm(prob.b))
    ratio = 1 + T * E**2 * b_norm / xT
    Omega = E**3 * tA * ratio
    if Omega <= E:
        k = K_FLOOR
        flags.append("k_floor")
    else:
        k = math.ceil(2 * math.log(Omega) / math.log(math.log(Omega)))
    k = max(k, 1)
    while not factorial_condition(m, k, delta, T, b_norm, xT):
        k += 1
    return SolverParams(h=h, m=m, p=m, k=k, delta=delta, Omega=Omega, flags=tuple(flags))


def _kappa(prob: LinearProblem, params: SolverParams, dim: int) -> ConditionEstimate:
    if dim <= KAPPA_DENSE_DIM:
        return kappa_of_system(build_L(prob.A, params).L, dense_limit=KAPPA_DENSE_DIM)
    est = kappa_of_taylor(prob.A.data, params)
    if math.isinf(est.kappa):
        raise NumericError("L is numerically singular", sigma_min=est.sigma_min)
    return est


def emulate(
    prob: LinearProblem,
    params: Optional[SolverParams] = None,
    *,
    solver: str = "blocks",
    compute_kappa: bool = True,
    cA: Optional[float] = None,
    trajectory: Optional[Trajectory] = None,
    xT_norm_estimate: Optional[float] = None,
) -> EmulationResult:
    """Run the whole pipeline on one problem.

    ``solver="blocks"`` is forward substitution over time blocks (matrix-free);
    ``solver="sparse"`` assembles ``L`` and uses a sparse triangular solve.
    Both are exact up to rounding.
    """
    if params is None:
        params = choose_params(prob, xT_norm_estimate)
    layout = BlockLayout(params.m + params.p, params.k + 1, prob.d)
    psi, _ = build_psi_in(prob.x0, prob.b, params)
    if solver == "sparse":
        y = build_L(prob.A, params).solve(psi)
    elif solver == "blocks":
        y = block_forward_solve(prob.A, params, psi)
    else:
        raise InputError(f"unknown solver {solver!r}")
    if not np.all(np.isfinite(y)):
        raise NumericError("linear solve produced non-finite values")

    y_blocks = [layout.block(y, i).copy() for i in range(params.m + 1)]
    y_m = y_blocks[-1]
    total = float(np.vdot(y, y).real)
    good = sum(float(np.vdot(layout.block(y, i), layout.block(y, i)).real) for i in range(params.m, params.m + params.p))
    p_meas = good / total if total > 0 else 0.0

    T = params.T
    x_T = exact_linear_solution(prob, prob.T) if math.isclose(T, prob.T, rel_tol=1e-12) else _exact_at(prob, T)
    xn = float(np.linalg.norm(x_T))
    rel = float(np.linalg.norm(y_m - x_T)) / xn if xn > 0 else float(np.linalg.norm(y_m))
    yn = float(np.linalg.norm(y_m))
    if xn > 0 and yn > 0:
        out_err = float(np.linalg.norm(y_m / yn - x_T / xn))
    else:
        out_err = 0.0 if xn == yn else math.inf

    traj = trajectory if trajectory is not None else linear_trajectory(prob)
    if cA is None:
        cA = c_of_a(prob.A, T)
    if compute_kappa:
        est = _kappa(prob, params, layout.dim)
        kL, kmethod = est.kappa, est.method
    else:
        kL, kmethod = math.nan, "skipped"

    res = EmulationResult(
        params=params,
        y=y,
        y_blocks=y_blocks,
        y_m=y_m,
        x_T=x_T,
        rel_error=rel,
        output_state_error=out_err,
        p_meas=p_meas,
        g=traj.g,
        kappa_L=kL,
        kappa_method=kmethod,
        c_of_a=cA,
    )
    res.bound_checks = _bound_checks(prob, res)
    if compute_kappa:
        res.cost = cost_model(params, None, traj.g, prob, kL, cA=cA)
    return res


def _exact_at(prob: LinearProblem, t: float) -> np.ndarray:
    # params may describe a horizon other than prob.T (user-supplied params)
    stretched = LinearProblem(prob.A, prob.b, prob.x0, max(t, prob.T), prob.eps)
    return exact_linear_solution(stretched, t)


def theorem_compliant(prob: LinearProblem, params: SolverParams, xT_norm: float) -> tuple[bool, str]:
    """Whether ``params`` meet the solution-error theorem's hypotheses."""
    nA = op_norm(prob.A)
    if nA * params.h > 1 + 1e-12:
        return False, "||Ah|| > 1"
    if not (params.delta > 0 and math.isfinite(params.delta)):
        return False, "delta unset"
    if xT_norm <= 0:
        return False, "x(T) = 0"
    if not factorial_condition(params.m, params.k, params.delta, params.T, float(np.linalg.norm(prob.b)), xT_norm):
        return False, "k below factorial condition"
    return True, ""


def _bound_checks(prob: LinearProblem, res: EmulationResult) -> list:
    params = res.params
    xn = float(np.linalg.norm(res.x_T))
    ok, why = theorem_compliant(prob, params, xn)
    checks = [
        _check(
            "solution_error",
            params.delta * xn if math.isfinite(params.delta) else math.nan,
            float(np.linalg.norm(res.y_m - res.x_T)),
            applicable=ok,
            note=why,
        ),
        _check("normalized_output", 2 * res.rel_error, res.output_state_error, rtol=1e-12),
    ]
    if math.isfinite(res.kappa_L):
        checks.append(verify_condition_bound(res, res.c_of_a, applicable=ok, note=why))
    checks.append(verify_success_prob(res, applicable=ok, note=why))
    return checks


def verify_condition_bound(result: EmulationResult, cA: float, applicable: bool = True, note: str = "") -> BoundCheck:
    """``kappa_L <= (m+p) C(A) (1+delta) e (1+e) max(1, sqrt k)``.

    The stated constant ``e(1+e)`` and the proof's ``sqrt(k)`` factor are both
    evaluated; the note records which of them the instance satisfies.
    """
    P = result.params
    delta = P.delta if math.isfinite(P.delta) else 0.0
    base = (P.m + P.p) * cA * (1 + delta) * E * (1 + E)
    proof = (P.m + P.p) * cA * (1 + delta) * E * (1 + E * math.sqrt(P.k))
    bound = base * max(1.0, math.sqrt(P.k))
    kL = result.kappa_L
    forms = [name for name, b in (("statement", base), ("proof", proof)) if kL <= b]
    extra = "satisfies: " + (", ".join(forms) if forms else "neither separate form")
    return _check("condition_number", bound, kL, applicable=applicable, note="; ".join(x for x in (note, extra) if x))


def verify_success_prob(result: EmulationResult, applicable: bool = True, note: str = "") -> BoundCheck:
    """``P_meas >= 1 / (18 g^2)`` when ``m = p`` and ``delta <= 1/2``."""
    P = result.params
    reasons = [note] if note else []
    if P.m != P.p:
        reasons.append("m != p")
    if not (P.delta <= 0.5):
        reasons.append("delta > 1/2")
    app = applicable and not reasons
    return _check(
        "prob_success",
        1.0 / (18 * result.g**2),
        result.p_meas,
        relation=">=",
        applicable=app,
        note="; ".join(reasons),
    )


def verify_truncation_lemmas(A, params: SolverParams, cA: Optional[float] = None) -> list:
    """Evaluate each truncation lemma's left side exactly and compare with its bound.

    ``l_1'`` is taken as ``h S_k(Ah)`` (the per-step factor actually used by the
    recursion). The identities are checked in the form ``A L_1 = L_0 - I``.
    """
    from .linalg_core import as_dense

    Ad = as_dense(A)
    d = Ad.shape[0]
    h, m, k = params.h, params.m, params.k
    T = m * h
    I = np.eye(d, dtype=complex)
    nA = float(np.linalg.norm(Ad, 2))
    Ah = Ad * h
    fk = math.factorial(k + 1)
    pre_l = nA * h <= 1 + 1e-12
    pre_L = pre_l and m * E**2 / fk <= 1
    why_l = "" if pre_l else "||Ah|| > 1"
    why_L = why_l or ("" if pre_L else "m e^2/(k+1)! > 1")

    l0 = scipy.linalg.expm(Ah)
    l0inv = scipy.linalg.expm(-Ah)
    l0p = taylor_T(k, Ah)
    Sk = taylor_S(k, Ah)
    l1 = _phi1(Ad, h)
    l1p = h * Sk
    L0 = np.linalg.matrix_power(l0, m)
    L0inv = np.linalg.matrix_power(l0inv, m)
    L0p = np.linalg.matrix_power(l0p, m)
    L1 = _phi1(Ad, T)
    L1p = np.zeros_like(I)
    P = I.copy()
    for _ in range(m):
        L1p += P @ l1p
        P = P @ l0p

    def nrm(X):
        return float(np.linalg.norm(X, 2))

    id_tol = 1e-10
    checks = [
        _check("lemma_l0", E**2 / fk, nrm((l0 - l0p) @ l0inv), applicable=pre_l, note=why_l),
        _check(
            "lemma_l1",
            E / (nA * fk) if nA > 0 else math.inf,
            nrm(l1 - l1p),
            applicable=pre_l,
            note=why_l,
        ),
        _check("lemma_L0", (E - 1) * m * E**2 / fk, nrm((L0 - L0p) @ L0inv), applicable=pre_L, note=why_L),
        _check("lemma_L1", m * T * E**5 / fk, nrm((L1 - L1p) @ L0inv), applicable=pre_L, note=why_L),
        _check("identity_AL1", id_tol * max(1.0, nrm(L0)), nrm(Ad @ L1 - (L0 - I))),
        _check("identity_AL1p", id_tol * max(1.0, nrm(L0p)), nrm(Ad @ L1p - (L0p - I))),
    ]
    step_norm = float(np.linalg.norm(step_operator(Ad, h, k)[:d].toarray(), 2))
    checks.append(_check("step_operator_norm", math.sqrt(k) * E, step_norm, applicable=pre_l, note=why_l))
    if math.isfinite(params.delta):
        if cA is None:
            cA = c_of_a(Ad, T)
        worst = max(nrm(np.linalg.matrix_power(l0p, j)) for j in range(m + 1))
        checks.append(
            _check(
                "taylor_power_bound",
                cA * (1 + params.delta),
                worst,
                applicable=pre_L,
                note=why_L,
                rtol=1e-6,
            )
        )
    return checks


def _phi1(Ad: np.ndarray, t: float) -> np.ndarray:
    n = Ad.shape[0]
    aug = np.zeros((2 * n, 2 * n), dtype=complex)
    aug[:n, :n] = Ad * t
    aug[:n, n:] = np.eye(n) * t
    return scipy.linalg.expm(aug)[:n, n:]


def cost_model(
    params: SolverParams,
    profile: Optional[SpectralProfile],
    g: float,
    prob: LinearProblem,
    kappa_L: float,
    cA: Optional[float] = None,
) -> QueryCost:
    """Symbolic cost factors, without hidden constants.

    ``query_factor = s k kappa_L`` multiplies ``polylog(k, m, d, kappa_L, 1/eps)``;
    ``main_factor = g T ||A|| C(A)``. ``polylog_factor`` is the product of
    ``log2(2 + arg)`` over the polylog arguments, an order-of-magnitude stand-in.
    """
    s = prob.A.sparsity
    nA = profile.op_norm if profile is not None else op_norm(prob.A)
    if cA is None:
        cA = profile.c_of_a if profile is not None else c_of_a(prob.A, prob.T)
    eps = prob.eps
    poly = {"k": params.k, "m": params.m, "d": prob.d, "kappa_L": kappa_L, "inv_eps": 1.0 / eps}
    xT = float(np.linalg.norm(exact_linear_solution(prob, prob.T)))
    bn = float(np.linalg.norm(prob.b))
    main_poly = {
        "b_ratio": 1 + prob.T * E**2 * bn / xT if xT > 0 else math.inf,
        "inv_eps": 1.0 / eps,
        "T_normA": prob.T * nA,
    }
    pf = 1.0
    for v in poly.values():
        pf *= math.log2(2 + v)
    return QueryCost(
        query_factor=float(s * params.k * kappa_L),
        main_factor=float(g * prob.T * nA * cA),
        polylog_args=poly,
        main_polylog_args=main_poly,
        polylog_factor=pf,
        components={
            "s": s,
            "k": params.k,
            "m": params.m,
            "d": prob.d,
            "kappa_L": kappa_L,
            "eps": eps,
            "g": g,
            "C_A": cA,
        },
    )

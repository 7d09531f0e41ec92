"""Optimality tests at a candidate lifted point.

Two direction-finding linear programs share the linearized inequality
rows g_i + grad g_i . d <= 0 and differ in the equality treatment:
the one-sided variant relaxes each equality to grad h_j . d <= 0 and
certifies unconditionally with multipliers (u, v) >= 0, while the
equality variant pins grad h_j . d = 0, leaves v free, and certifies
only under a feasible-direction hypothesis that is not machine-checkable
(the verdict says so).  A nonnegative LP optimum means no first-order
descent direction; the LP duals are exactly the KKT multipliers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .expr import Point, gradient
from .lagrangian import Multipliers, lagrangian
from .lp import LpProblem, solve_lp
from .model import check_feasible

CNP_INEQ = "cnp_ineq"
CNP0_EQ = "cnp0_eq"

CERT_TOL = 1e-8

VERDICT_GLOBAL = "certified_global"
VERDICT_KKT = "kkt_point"
VERDICT_INCONCLUSIVE = "inconclusive"


class CertificateError(Exception):
    """Precondition or internal failure in an optimality test."""


@dataclass
class KktResidual:
    stationarity: float
    complementarity: float
    sign_violation: float

    def passes(self, tol):
        return max(self.stationarity, self.complementarity, self.sign_violation) <= tol

    def to_dict(self):
        return {
            "stationarity": self.stationarity,
            "complementarity": self.complementarity,
            "sign_violation": self.sign_violation,
        }


@dataclass
class LpTestResult:
    variant: str
    status: str  # optimal | unbounded
    objective: float | None
    u: np.ndarray | None
    v: np.ndarray | None
    d: np.ndarray | None
    ray: np.ndarray | None
    certified: bool


def _require_in_lifted_set(prob, p, feas_tol):
    rep = check_feasible(prob, p, tol=feas_tol)
    if not rep.in_feasible_set:
        raise CertificateError(
            f"point is not feasible within {feas_tol:g} "
            f"(worst inequality {rep.max_ineq_violation:.3g}, "
            f"worst equality {rep.max_eq_residual:.3g})"
        )
    if rep.exactness_gap is not None:
        scale = max(1.0, abs(prob.objective(p)))
        if rep.exactness_gap > feas_tol * scale:
            raise CertificateError(
                f"lifted objective differs from the reference by "
                f"{rep.exactness_gap:.3g}; the point is outside the matched set"
            )
    return rep


def direction_lp(prob, p, variant):
    """The linearized direction-finding program at p."""
    c = gradient(prob.g, p)
    gv, hv = prob.constraint_values(p)
    rows_g = [gradient(gi, p) for gi in prob.ineqs]
    rows_h = [gradient(hj, p) for hj in prob.eqs]
    A_ub = rows_g[:]
    b_ub = list(-gv)
    A_eq, b_eq = [], []
    if variant == CNP_INEQ:
        A_ub += rows_h
        b_ub += [0.0] * len(rows_h)
    elif variant == CNP0_EQ:
        A_eq = rows_h
        b_eq = [0.0] * len(rows_h)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return LpProblem(
        c=c,
        A_ub=np.array(A_ub) if A_ub else None,
        b_ub=np.array(b_ub) if b_ub else None,
        A_eq=np.array(A_eq) if A_eq else None,
        b_eq=np.array(b_eq) if b_eq else None,
    )


def _lp_test(prob, p, variant, feas_tol, cert_tol):
    _require_in_lifted_set(prob, p, feas_tol)
    lp = direction_lp(prob, p, variant)
    if prob.s + prob.r == 0:
        # no constraints: either stationary or steepest descent wins
        c = lp.c
        if np.linalg.norm(c) <= cert_tol:
            return LpTestResult(variant, "optimal", 0.0, np.zeros(0), np.zeros(0),
                                np.zeros(c.size), None, True)
        return LpTestResult(variant, "unbounded", None, None, None, None, -c, False)
    sol = solve_lp(lp)
    if sol.status == "infeasible":
        # d = 0 satisfies every row at a feasible point, so this is a bug
        raise CertificateError("direction program reported infeasible at a feasible point")
    if sol.status == "unbounded":
        return LpTestResult(variant, "unbounded", None, None, None, None, sol.ray, False)
    s = prob.s
    if variant == CNP_INEQ:
        u = sol.duals_ub[:s]
        v = sol.duals_ub[s:]
    else:
        u = sol.duals_ub[:s]
        v = sol.duals_eq
    certified = sol.objective >= -cert_tol
    return LpTestResult(variant, "optimal", sol.objective, u, v, sol.d, None, certified)


def lp_test_ineq(prob, p, feas_tol=1e-6, cert_tol=CERT_TOL):
    """One-sided linearization test; certifying multipliers have v >= 0."""
    return _lp_test(prob, p, CNP_INEQ, feas_tol, cert_tol)


def lp_test_eq(prob, p, feas_tol=1e-6, cert_tol=CERT_TOL):
    """Equality-direction test; v is free and the verdict holds under the
    feasible-direction hypothesis, which is not checked here."""
    return _lp_test(prob, p, CNP0_EQ, feas_tol, cert_tol)


def kkt_residual(prob, p, u, v, variant=CNP_INEQ):
    """Stationarity norm, worst |u_i g_i|, and the worst sign violation
    (u always, v only in the one-sided variant)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if u.shape != (prob.s,) or v.shape != (prob.r,):
        raise ValueError("multiplier lengths must match the constraint counts")
    stat = gradient(prob.g, p)
    for ui, gi in zip(u, prob.ineqs):
        stat = stat + ui * gradient(gi, p)
    for vj, hj in zip(v, prob.eqs):
        stat = stat + vj * gradient(hj, p)
    gv, _ = prob.constraint_values(p)
    comp = float(np.max(np.abs(u * gv))) if u.size else 0.0
    sign = float(max(0.0, -u.min())) if u.size else 0.0
    if variant == CNP_INEQ and v.size:
        sign = max(sign, float(max(0.0, -v.min())))
    return KktResidual(
        stationarity=float(np.linalg.norm(stat)),
        complementarity=comp,
        sign_violation=sign,
    )


def grad_zero_test(prob, p, tol=CERT_TOL):
    """Zero objective gradient at a feasible point certifies optimality."""
    return float(np.linalg.norm(gradient(prob.g, p))) <= tol


def saddle_check(prob, p, mult, samples=500, seed=0, tol=1e-8):
    """Count sampled violations of the two-sided saddle inequality
    L(p; u', v') <= L(p; u, v) <= L(x', y'; u, v)."""
    if samples <= 0:
        raise ValueError("samples must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = prob.box
    mid = lagrangian(prob, p, mult)
    u_hi = 1.0 + 2.0 * (float(np.max(mult.u)) if mult.u.size else 0.0)
    v_hi = 1.0 + 2.0 * (float(np.max(np.abs(mult.v))) if mult.v.size else 0.0)
    violations = 0
    for _ in range(samples):
        u_rand = rng.uniform(0.0, u_hi, prob.s)
        if mult.sign_mode == "v_nonneg":
            v_rand = rng.uniform(0.0, v_hi, prob.r)
        else:
            v_rand = rng.uniform(-v_hi, v_hi, prob.r)
        other_mult = Multipliers(u_rand, v_rand, mult.sign_mode)
        q = Point(rng.uniform(lo, hi, prob.n), rng.uniform(lo, hi, prob.m))
        left = lagrangian(prob, p, other_mult)
        right = lagrangian(prob, q, mult)
        if left > mid + tol or mid > right + tol:
            violations += 1
    return violations


@dataclass
class Certificate:
    point: Point
    feasibility: object
    grad_norm_of_g: float
    lp_test: LpTestResult | None
    kkt: KktResidual | None
    multipliers: tuple | None  # (u, v) backing the kkt residuals
    verdict: str

    def to_dict(self):
        lp_part = None
        if self.lp_test is not None:
            lp_part = {
                "variant": self.lp_test.variant,
                "status": self.lp_test.status,
                "objective": self.lp_test.objective,
            }
        kkt_part = None
        if self.kkt is not None:
            u, v = self.multipliers
            kkt_part = {
                "u": list(map(float, u)),
                "v": list(map(float, v)),
                **self.kkt.to_dict(),
            }
        return {
            "point": {"x": self.point.x.tolist(), "y": self.point.y.tolist()},
            "feasibility": self.feasibility.to_dict(),
            "grad_norm": self.grad_norm_of_g,
            "lp_test": lp_part,
            "kkt": kkt_part,
            "verdict": self.verdict,
        }

    def to_json(self, indent=None):
        return json.dumps(self.to_dict(), indent=indent)


def certify(prob, p, feas_tol=1e-6, cert_tol=CERT_TOL):
    """Run the test battery at p and assemble the verdict.

    certified_global needs feasibility plus either a zero objective
    gradient or a nonnegative optimum of the one-sided direction program;
    a nonnegative optimum of the equality variant alone is reported as
    kkt_point because its global claim rests on an unchecked hypothesis.
    """
    prob.check_point(p)
    rep = check_feasible(prob, p, tol=feas_tol)
    grad_norm = float(np.linalg.norm(gradient(prob.g, p)))
    gap_ok = True
    if rep.exactness_gap is not None:
        gap_ok = rep.exactness_gap <= feas_tol * max(1.0, abs(prob.objective(p)))
    if not (rep.in_feasible_set and gap_ok):
        return Certificate(p, rep, grad_norm, None, None, None, VERDICT_INCONCLUSIVE)

    if grad_norm <= cert_tol:
        return Certificate(p, rep, grad_norm, None, None, None, VERDICT_GLOBAL)

    ineq = lp_test_ineq(prob, p, feas_tol, cert_tol)
    if ineq.certified:
        res = kkt_residual(prob, p, ineq.u, ineq.v, CNP_INEQ)
        return Certificate(p, rep, grad_norm, ineq, res, (ineq.u, ineq.v), VERDICT_GLOBAL)

    eq = lp_test_eq(prob, p, feas_tol, cert_tol)
    if eq.certified:
        res = kkt_residual(prob, p, eq.u, eq.v, CNP0_EQ)
        return Certificate(p, rep, grad_norm, eq, res, (eq.u, eq.v), VERDICT_KKT)

    return Certificate(p, rep, grad_norm, eq, None, None, VERDICT_INCONCLUSIVE)

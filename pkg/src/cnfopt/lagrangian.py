"""Lagrangian machinery for the lifted problems.

The plain Lagrangian L = g + u.g + v.h (u >= 0 always; v free or
nonnegative depending on the multiplier mode), the augmented form
A = L + rho*(sum max(g_i,0)^2 + sum h_j^2), the pure penalty
F = A at zero multipliers, and the dual function theta(u, v) =
inf_(x,y) L evaluated by the inner solver.

The squared hinge max(g_i,0)^2 is continuously differentiable with
derivative 2*max(g_i,0)*grad g_i, so no subgradient handling is needed
anywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .expr import Point, compiled_gradient, compiled_value, evaluate, value_and_gradient
from .inner import InnerConfig, InnerResult, minimize
from .model import midpoint_convexity_violations

V_FREE = "v_free"
V_NONNEG = "v_nonneg"


@dataclass(frozen=True)
class Multipliers:
    """Inequality multipliers u (always >= 0) and equality multipliers v
    (free in mode v_free, componentwise >= 0 in mode v_nonneg)."""

    u: np.ndarray
    v: np.ndarray
    sign_mode: str = V_FREE

    def __post_init__(self):
        object.__setattr__(self, "u", np.asarray(self.u, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.sign_mode not in (V_FREE, V_NONNEG):
            raise ValueError(f"unknown sign mode {self.sign_mode!r}")
        if self.u.size and self.u.min() < 0:
            raise ValueError("inequality multipliers must be nonnegative")
        if self.sign_mode == V_NONNEG and self.v.size and self.v.min() < 0:
            raise ValueError("equality multipliers must be nonnegative in v_nonneg mode")

    @classmethod
    def zeros(cls, prob, sign_mode=V_FREE):
        return cls(np.zeros(prob.s), np.zeros(prob.r), sign_mode)


@dataclass(frozen=True)
class PenaltyParams:
    rho: float

    def __post_init__(self):
        if self.rho <= 0:
            raise ValueError("penalty parameter must be positive")


def _check_mult(prob, mult):
    if mult.u.shape != (prob.s,) or mult.v.shape != (prob.r,):
        raise ValueError(
            f"multiplier shapes ({mult.u.shape}, {mult.v.shape}) do not match "
            f"problem with s={prob.s}, r={prob.r}"
        )


def lagrangian(prob, p, mult):
    """g(p) + sum_i u_i g_i(p) + sum_j v_j h_j(p); the same formula for
    both multiplier sign modes."""
    _check_mult(prob, mult)
    gv, hv = prob.constraint_values(p)
    return float(prob.objective(p) + mult.u @ gv + mult.v @ hv)


def augmented(prob, p, mult, pen):
    """Lagrangian plus rho-weighted squared violations."""
    _check_mult(prob, mult)
    gv, hv = prob.constraint_values(p)
    gplus = np.maximum(gv, 0.0)
    return float(
        prob.objective(p)
        + mult.u @ gv
        + mult.v @ hv
        + pen.rho * (gplus @ gplus + hv @ hv)
    )


def penalty(prob, p, pen):
    """Pure penalty value; equals the augmented form at zero multipliers."""
    return augmented(prob, p, Multipliers.zeros(prob), pen)


def augmented_gradient(prob, p, mult, pen):
    """grad g + sum_i (u_i + 2 rho max(g_i,0)) grad g_i
    + sum_j (v_j + 2 rho h_j) grad h_j, ordered x block then y block."""
    _check_mult(prob, mult)
    prob.check_point(p)
    return _aug_value_grad(prob, p, mult.u, mult.v, pen.rho, None)[1]


def _aug_value_grad(prob, p, u, v, rho, pos, ineq_idx=None, eq_idx=None):
    """One pass of values and gradients of the augmented Lagrangian,
    restricted to the constraint subsets and flat coordinates given."""
    val, grad = value_and_gradient(prob.g, p, pos)
    ineq_idx = range(prob.s) if ineq_idx is None else ineq_idx
    eq_idx = range(prob.r) if eq_idx is None else eq_idx
    for slot, i in enumerate(ineq_idx):
        gi, ggrad = value_and_gradient(prob.ineqs[i], p, pos)
        gplus = gi if gi > 0.0 else 0.0
        val += u[slot] * gi + rho * gplus * gplus
        w = u[slot] + 2.0 * rho * gplus
        if w != 0.0:
            grad += w * ggrad
    for slot, j in enumerate(eq_idx):
        hj, hgrad = value_and_gradient(prob.eqs[j], p, pos)
        val += v[slot] * hj + rho * hj * hj
        w = v[slot] + 2.0 * rho * hj
        if w != 0.0:
            grad += w * hgrad
    return float(val), grad


def _aug_value(prob, p, u, v, rho, ineq_idx=None, eq_idx=None):
    val = evaluate(prob.g, p)
    ineq_idx = range(prob.s) if ineq_idx is None else ineq_idx
    eq_idx = range(prob.r) if eq_idx is None else eq_idx
    for slot, i in enumerate(ineq_idx):
        gi = evaluate(prob.ineqs[i], p)
        gplus = gi if gi > 0.0 else 0.0
        val += u[slot] * gi + rho * gplus * gplus
    for slot, j in enumerate(eq_idx):
        hj = evaluate(prob.eqs[j], p)
        val += v[slot] * hj + rho * hj * hj
    return float(val)


def augmented_objective(prob, u, v, rho, base=None, wrt=None, ineq_idx=None, eq_idx=None):
    """Closures for the inner solver: ``fun(z) -> (value, grad)`` and a
    value-only twin, over the flat coordinates ``wrt`` (all by default)
    with the remaining coordinates frozen at ``base``.

    ``ineq_idx``/``eq_idx`` select a constraint subset with the given
    multiplier slices; rho = 0 yields the plain Lagrangian.  Every
    expression is compiled once up front; the closures run straight-line
    code plus sparse gradient scatter-adds.
    """
    n, m = prob.n, prob.m
    if wrt is None:
        wrt_idx = np.arange(n + m)
        pos = None
        width = n + m
    else:
        wrt_idx = np.asarray(list(wrt), dtype=int)
        pos = {int(f): i for i, f in enumerate(wrt_idx)}
        width = len(wrt_idx)
    base_vec = (base.flat() if base is not None else np.zeros(n + m)).copy()

    g_value = compiled_value(prob.g)
    g_grad, g_slots = compiled_gradient(prob.g, n, pos, width)
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    terms = []  # (value_fn, grad_fn, slot list, multiplier, is_equality)
    for slot, i in enumerate(range(prob.s) if ineq_idx is None else ineq_idx):
        e = prob.ineqs[i]
        gfn, slots = compiled_gradient(e, n, pos, width)
        terms.append((compiled_value(e), gfn, slots.tolist(), u[slot], False))
    for slot, j in enumerate(range(prob.r) if eq_idx is None else eq_idx):
        e = prob.eqs[j]
        gfn, slots = compiled_gradient(e, n, pos, width)
        terms.append((compiled_value(e), gfn, slots.tolist(), v[slot], True))

    def to_point(z):
        vec = base_vec.copy()
        vec[wrt_idx] = z
        return Point.from_flat(vec, n, m)

    def fun(z):
        vec = base_vec.copy()
        vec[wrt_idx] = z
        # plain lists keep the compiled straight-line code on the float
        # fast path instead of numpy scalar arithmetic
        xa, ya = vec[:n].tolist(), vec[n:].tolist()
        val, partials = g_grad(xa, ya)
        grad = np.zeros(width)
        if g_slots.size:
            grad[g_slots] = partials
        for _, gfn, slots, mult, is_eq in terms:
            cv, cparts = gfn(xa, ya)
            if is_eq:
                val += mult * cv + rho * cv * cv
                w = mult + 2.0 * rho * cv
            else:
                cplus = cv if cv > 0.0 else 0.0
                val += mult * cv + rho * cplus * cplus
                w = mult + 2.0 * rho * cplus
            if w != 0.0:
                for idx, dp in zip(slots, cparts):
                    grad[idx] += w * dp
        return float(val), grad

    def value_fn(z):
        vec = base_vec.copy()
        vec[wrt_idx] = z
        xa, ya = vec[:n].tolist(), vec[n:].tolist()
        val = g_value(xa, ya)
        for vfn, _, _, mult, is_eq in terms:
            cv = vfn(xa, ya)
            if is_eq:
                val += mult * cv + rho * cv * cv
            else:
                cplus = cv if cv > 0.0 else 0.0
                val += mult * cv + rho * cplus * cplus
        return float(val)

    return fun, value_fn, to_point


@dataclass
class DualValue:
    """Outcome of evaluating theta at fixed multipliers.  ``local`` is set
    when the Lagrangian failed a sampled convexity check, in which case a
    finite value is only an upper bound on the true infimum."""

    status: str  # finite | unbounded_below | failed
    value: float | None
    local: bool
    inner: InnerResult | None

    @property
    def finite(self):
        return self.status == "finite"


def dual_value(prob, mult, inner_cfg=None, start=None, convexity_pairs=100, seed=0):
    """theta(u, v): minimize the Lagrangian over (x, y) from ``start``
    (problem default when omitted).  A diverging inner solve is reported
    as unbounded_below; an inner solve that stalls without converging is
    a distinct "failed" status."""
    _check_mult(prob, mult)
    cfg = inner_cfg if inner_cfg is not None else InnerConfig()
    start = start if start is not None else prob.default_start()
    fun, value_fn, to_point = augmented_objective(prob, mult.u, mult.v, 0.0, base=start)
    res = minimize(fun, start.flat(), cfg, value_fn=value_fn)

    violations = midpoint_convexity_violations(
        lambda vec: _aug_value(prob, Point.from_flat(vec, prob.n, prob.m), mult.u, mult.v, 0.0),
        prob.n + prob.m,
        prob.box,
        convexity_pairs,
        seed,
    )
    local = violations > 0
    if res.status == "diverged":
        return DualValue("unbounded_below", None, local, res)
    if res.status == "converged":
        return DualValue("finite", res.value, local, res)
    return DualValue("failed", None, local, res)

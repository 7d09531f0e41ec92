"""Dense two-phase primal simplex for the small optimality-test programs.

Free variables are split into nonnegative pairs, inequality rows get
slacks, and Bland's rule is always on because the certificate programs
are heavily degenerate (many zero right-hand sides).  Row multipliers
are returned alongside the primal solution: ``duals_ub`` are the
nonnegative multipliers of the A_ub d <= b_ub rows and ``duals_eq`` the
free multipliers of the equality rows, normalized so that
c + A_ub^T duals_ub + A_eq^T duals_eq = 0 at an optimum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PIVOT_TOL = 1e-10
REDUCED_COST_TOL = 1e-9
_MAX_PIVOTS = 100_000


class SimplexError(Exception):
    """Internal failure (the anti-cycling pivot budget ran out)."""


def _as_matrix(a, rows, cols):
    if a is None:
        return np.zeros((rows if rows is not None else 0, cols))
    out = np.atleast_2d(np.asarray(a, dtype=float))
    return out


@dataclass
class LpProblem:
    """min c.d subject to A_ub d <= b_ub and A_eq d = b_eq, d free."""

    c: np.ndarray
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        k = self.c.shape[0]
        self.A_ub = _as_matrix(self.A_ub, 0, k)
        self.A_eq = _as_matrix(self.A_eq, 0, k)
        self.b_ub = np.asarray(self.b_ub if self.b_ub is not None else [], dtype=float)
        self.b_eq = np.asarray(self.b_eq if self.b_eq is not None else [], dtype=float)
        if self.A_ub.shape != (self.b_ub.shape[0], k):
            raise ValueError("A_ub/b_ub dimensions inconsistent with c")
        if self.A_eq.shape != (self.b_eq.shape[0], k):
            raise ValueError("A_eq/b_eq dimensions inconsistent with c")
        for arr in (self.c, self.A_ub, self.b_ub, self.A_eq, self.b_eq):
            if arr.size and not np.isfinite(arr).all():
                raise ValueError("LP data must be finite")

    @property
    def nvars(self):
        return self.c.shape[0]


@dataclass
class LpSolution:
    status: str  # optimal | unbounded | infeasible
    d: np.ndarray | None = None
    objective: float | None = None
    duals_ub: np.ndarray | None = None
    duals_eq: np.ndarray | None = None
    ray: np.ndarray | None = None
    phase1_value: float | None = None


def _standardize(lp):
    """Split d = d+ - d-, add slacks, and flip rows to b >= 0.

    Returns (A, b, costs, signs) where signs records the row flips so
    duals can be mapped back to the original rows.
    """
    k = lp.nvars
    mu = lp.b_ub.shape[0]
    me = lp.b_eq.shape[0]
    ncols = 2 * k + mu
    A = np.zeros((mu + me, ncols))
    b = np.concatenate([lp.b_ub, lp.b_eq])
    A[:mu, :k] = lp.A_ub
    A[:mu, k : 2 * k] = -lp.A_ub
    A[:mu, 2 * k :] = np.eye(mu)
    A[mu:, :k] = lp.A_eq
    A[mu:, k : 2 * k] = -lp.A_eq
    costs = np.concatenate([lp.c, -lp.c, np.zeros(mu)])
    signs = np.ones(mu + me)
    flip = b < 0
    A[flip] *= -1.0
    b = np.abs(b)
    signs[flip] = -1.0
    return A, b, costs, signs


def _d_from_z(z, k):
    return z[:k] - z[k : 2 * k]


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _bland_iterate(T, basis, costs, candidate_cols, pivots_used):
    """Run Bland-rule pivots to optimality; returns ('optimal', pivots) or
    ('unbounded', entering column index)."""
    mrows = T.shape[0]
    while True:
        cb = costs[basis]
        # reduced costs over the candidate columns only
        entering = -1
        for j in candidate_cols:
            if j in basis:
                continue
            rj = costs[j] - cb @ T[:, j]
            if rj < -REDUCED_COST_TOL:
                entering = j
                break
        if entering < 0:
            return "optimal", pivots_used
        col = T[:, entering]
        leave_row = -1
        best_ratio = np.inf
        for r in range(mrows):
            if col[r] > PIVOT_TOL:
                ratio = T[r, -1] / col[r]
                if ratio < best_ratio - PIVOT_TOL or (
                    abs(ratio - best_ratio) <= PIVOT_TOL
                    and (leave_row < 0 or basis[r] < basis[leave_row])
                ):
                    best_ratio = ratio
                    leave_row = r
        if leave_row < 0:
            return "unbounded", entering
        _pivot(T, basis, leave_row, entering)
        pivots_used += 1
        if pivots_used > _MAX_PIVOTS:
            raise SimplexError("pivot budget exhausted despite Bland's rule")


def solve_lp(lp):
    """Two-phase primal simplex.  Optimal solutions carry the dual
    multipliers; unbounded ones carry a descent ray in d-space;
    infeasible ones carry the positive phase-1 optimum."""
    k = lp.nvars
    mu = lp.b_ub.shape[0]
    me = lp.b_eq.shape[0]
    mrows = mu + me

    if mrows == 0:
        nz = np.nonzero(np.abs(lp.c) > 0.0)[0]
        if nz.size:
            ray = np.zeros(k)
            ray[nz[0]] = -np.sign(lp.c[nz[0]])
            return LpSolution(status="unbounded", ray=ray)
        return LpSolution(
            status="optimal",
            d=np.zeros(k),
            objective=0.0,
            duals_ub=np.zeros(0),
            duals_eq=np.zeros(0),
        )

    A, b, costs, signs = _standardize(lp)
    ncols = A.shape[1]

    # tableau with artificial columns appended; they start as the basis and
    # track the basis inverse, which is what the dual extraction reads
    T = np.zeros((mrows, ncols + mrows + 1))
    T[:, :ncols] = A
    T[:, ncols : ncols + mrows] = np.eye(mrows)
    T[:, -1] = b
    basis = [ncols + i for i in range(mrows)]
    structural = list(range(ncols))

    phase1_costs = np.zeros(ncols + mrows)
    phase1_costs[ncols:] = 1.0
    status, pivots = _bland_iterate(T, basis, phase1_costs, structural, 0)
    if status != "optimal":
        raise SimplexError("phase 1 cannot be unbounded")
    phase1_value = float(phase1_costs[basis] @ T[:, -1])
    feas_tol = 1e-8 * max(1.0, float(np.abs(b).max()))
    if phase1_value > feas_tol:
        return LpSolution(status="infeasible", phase1_value=phase1_value)

    # drive any zero-valued artificials out of the basis where possible
    for r in range(mrows):
        if basis[r] >= ncols:
            for j in structural:
                if j not in basis and abs(T[r, j]) > PIVOT_TOL:
                    _pivot(T, basis, r, j)
                    break

    phase2_costs = np.concatenate([costs, np.zeros(mrows)])
    status, info = _bland_iterate(T, basis, phase2_costs, structural, pivots)
    if status == "unbounded":
        entering = info
        ray_z = np.zeros(ncols)
        ray_z[entering] = 1.0
        for r in range(mrows):
            if basis[r] < ncols:
                ray_z[basis[r]] = -T[r, entering]
        return LpSolution(status="unbounded", ray=_d_from_z(ray_z, k))

    z = np.zeros(ncols)
    for r in range(mrows):
        if basis[r] < ncols:
            z[basis[r]] = T[r, -1]
    d = _d_from_z(z, k)
    objective = float(lp.c @ d)
    # y = c_B B^{-1}, read through the artificial block; undo row flips and
    # negate to match the KKT convention c + A_ub^T.u + A_eq^T.v = 0
    y = phase2_costs[basis] @ T[:, ncols : ncols + mrows]
    y_orig = -(signs * y)
    duals_ub = y_orig[:mu].copy()
    duals_eq = y_orig[mu:].copy()
    # rounding can leave duals a hair below zero; anything materially
    # negative would be a bug and is left visible for the property tests
    duals_ub[(duals_ub > -1e-9) & (duals_ub < 0.0)] = 0.0
    return LpSolution(
        status="optimal",
        d=d,
        objective=objective,
        duals_ub=duals_ub,
        duals_eq=duals_eq,
    )


def enumerate_vertices_oracle(lp, size_cap=12):
    """Brute-force reference solver: enumerate every basis of the
    standardized system, keep the best feasible vertex, and flag
    unboundedness via a negative-reduced-cost column with a nonpositive
    basis image.  Only for tests; refuses more than ``size_cap`` columns."""
    from itertools import combinations

    k = lp.nvars
    mu = lp.b_ub.shape[0]
    if 2 * k + mu > size_cap:
        raise ValueError(f"oracle size cap exceeded: {2 * k + mu} columns > {size_cap}")
    if mu + lp.b_eq.shape[0] == 0:
        return solve_lp(lp)  # trivial cases share the closed-form branch

    A, b, costs, _ = _standardize(lp)

    # Gaussian elimination to full row rank; dependent inconsistent rows
    # mean infeasibility outright
    M = np.hstack([A, b[:, None]])
    rank = 0
    for col in range(A.shape[1]):
        piv = rank + int(np.argmax(np.abs(M[rank:, col]))) if rank < M.shape[0] else -1
        if piv < 0 or abs(M[piv, col]) < 1e-9:
            continue
        M[[rank, piv]] = M[[piv, rank]]
        for r in range(M.shape[0]):
            if r != rank and M[r, col] != 0.0:
                M[r] -= (M[r, col] / M[rank, col]) * M[rank]
        rank += 1
        if rank == M.shape[0]:
            break
    for r in range(rank, M.shape[0]):
        if abs(M[r, -1]) > 1e-7:
            return LpSolution(status="infeasible", phase1_value=abs(M[r, -1]))
    A2, b2 = M[:rank, :-1], M[:rank, -1]
    ncols = A2.shape[1]

    best_obj = np.inf
    best_z = None
    feasible = False
    for cols in combinations(range(ncols), rank):
        B = A2[:, cols]
        try:
            zb = np.linalg.solve(B, b2)
        except np.linalg.LinAlgError:
            continue
        if not np.isfinite(zb).all() or np.linalg.norm(B @ zb - b2) > 1e-7:
            continue
        if zb.min(initial=0.0) < -1e-9:
            continue
        feasible = True
        z = np.zeros(ncols)
        z[list(cols)] = zb
        obj = float(costs @ z)
        if obj < best_obj - 1e-12:
            best_obj = obj
            best_z = z
        # unbounded ray probe at this basis
        y = np.linalg.solve(B.T, costs[list(cols)])
        for j in range(ncols):
            if j in cols:
                continue
            if costs[j] - y @ A2[:, j] < -1e-9:
                img = np.linalg.solve(B, A2[:, j])
                if img.max(initial=0.0) <= 1e-9:
                    ray_z = np.zeros(ncols)
                    ray_z[j] = 1.0
                    for slot, cc in enumerate(cols):
                        ray_z[cc] = -img[slot]
                    return LpSolution(status="unbounded", ray=_d_from_z(ray_z, k))
    if not feasible:
        return LpSolution(status="infeasible", phase1_value=np.nan)
    return LpSolution(status="optimal", d=_d_from_z(best_z, k), objective=best_obj)

"""Unconstrained smooth minimizers for the outer multiplier loops.

Two methods over flat coordinate vectors: backtracking gradient descent,
and a Newton method whose Hessian comes from central differences of the
gradient with a Levenberg-style diagonal shift.  Both enforce the Armijo
condition on every accepted step and guard against unbounded descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

GRADIENT_DESCENT = "gradient_descent"
NEWTON_FD = "newton_fd"

# line-search trial steps below this are treated as a stall
_MIN_STEP = 1e-20

# numerical-floor detection over a window of accepted steps: the solve is
# declared stalled only when the best gradient norm stops improving AND
# the window's total decrease sits at rounding scale.  Flat penalty
# landscapes hit this; ordinary slow descent keeps making f-progress and
# is left alone.
_PLATEAU_WINDOW = 50
_PLATEAU_FACTOR = 0.99
_NOISE_DECREASE = 1e-11


@dataclass
class InnerConfig:
    method: str = GRADIENT_DESCENT
    grad_tol: float = 1e-8
    max_iters: int = 10000
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    init_step: float = 1.0
    value_floor: float = -1e12
    point_norm_cap: float = 1e8
    fd_step: float = 1e-5

    def __post_init__(self):
        if self.method not in (GRADIENT_DESCENT, NEWTON_FD):
            raise ValueError(f"unknown inner method {self.method!r}")
        if self.grad_tol <= 0 or self.max_iters < 1:
            raise ValueError("grad_tol must be positive and max_iters >= 1")


@dataclass
class InnerResult:
    point: np.ndarray
    value: float
    grad_norm: float
    status: str  # converged | max_iters | diverged
    iterations: int


def _newton_direction(fun, z, grad, cfg):
    """Shifted-Newton direction from a finite-difference Hessian; falls
    back to steepest descent if the factorization keeps failing."""
    dim = z.shape[0]
    h = cfg.fd_step
    H = np.empty((dim, dim))
    for i in range(dim):
        zp = z.copy()
        zm = z.copy()
        zp[i] += h
        zm[i] -= h
        H[:, i] = (fun(zp)[1] - fun(zm)[1]) / (2.0 * h)
    H = 0.5 * (H + H.T)
    if not np.isfinite(H).all():
        return -grad
    eye = np.eye(dim)
    tau = 1e-8
    while tau <= 1e20:
        try:
            shifted = H + tau * eye
            np.linalg.cholesky(shifted)  # positive-definiteness certificate
            d = np.linalg.solve(shifted, -grad)
        except np.linalg.LinAlgError:
            tau *= 10.0
            continue
        if np.isfinite(d).all() and grad @ d < 0.0:
            return d
        tau *= 10.0
    return -grad


def minimize(fun, start, cfg=None, value_fn=None, callback=None):
    """Minimize a smooth function given by ``fun(z) -> (value, gradient)``.

    ``value_fn`` optionally provides a cheaper value-only evaluation for
    line-search trials.  Convergence means the gradient norm dropped below
    grad_tol scaled by max(1, |f(start)|), which keeps the test meaningful
    when penalty weights inflate the objective.  Divergence means an
    accepted iterate fell below value_floor or left the point-norm cap
    while still descending.  ``callback(z, f, step, slope)`` fires after
    each accepted step.
    """
    cfg = cfg if cfg is not None else InnerConfig()
    value_of = value_fn if value_fn is not None else (lambda z: fun(z)[0])

    z = np.asarray(start, dtype=float).copy()
    f, g = fun(z)
    tol = cfg.grad_tol * max(1.0, abs(f))
    trial = cfg.init_step
    window_best = np.inf
    prev_window_best = np.inf
    window_count = 0
    window_f0 = f

    for it in range(cfg.max_iters):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= tol:
            return InnerResult(z, f, gnorm, "converged", it)
        if f < cfg.value_floor or np.linalg.norm(z) > cfg.point_norm_cap:
            return InnerResult(z, f, gnorm, "diverged", it)
        window_best = min(window_best, gnorm)
        window_count += 1
        if window_count >= _PLATEAU_WINDOW:
            no_gnorm_progress = window_best > _PLATEAU_FACTOR * prev_window_best
            noise_level = (window_f0 - f) <= _NOISE_DECREASE * max(1.0, abs(f))
            if no_gnorm_progress and noise_level:
                return InnerResult(z, f, gnorm, "max_iters", it)
            prev_window_best = window_best
            window_best = np.inf
            window_count = 0
            window_f0 = f

        if cfg.method == NEWTON_FD:
            d = _newton_direction(fun, z, g, cfg)
            t = cfg.init_step
        else:
            d = -g
            t = trial
        slope = float(g @ d)
        if slope >= 0.0:  # never step along a non-descent direction
            d = -g
            slope = -gnorm * gnorm
            t = cfg.init_step

        accepted = False
        while t >= _MIN_STEP:
            zt = z + t * d
            ft = value_of(zt)
            if ft <= f + cfg.armijo_c * t * slope:
                accepted = True
                break
            t *= cfg.backtrack
        if not accepted:
            # rounding prevents any further decrease
            return InnerResult(z, f, gnorm, "max_iters", it)

        z = zt
        f, g = fun(z)
        if cfg.method == GRADIENT_DESCENT:
            trial = min(t * 2.0, 1e16)
        if callback is not None:
            callback(z, f, t, slope)

    gnorm = float(np.linalg.norm(g))
    if gnorm <= tol:
        return InnerResult(z, f, gnorm, "converged", cfg.max_iters)
    if f < cfg.value_floor or np.linalg.norm(z) > cfg.point_norm_cap:
        return InnerResult(z, f, gnorm, "diverged", cfg.max_iters)
    return InnerResult(z, f, gnorm, "max_iters", cfg.max_iters)

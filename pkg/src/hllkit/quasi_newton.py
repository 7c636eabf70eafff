"""Dense BFGS maximizer for smooth low-dimensional objectives.

Written for the three-parameter likelihood in
:mod:`hllkit.joint_estimation` but generic over dimension. The caller
supplies an objective returning ``(value, gradient)``; maximization
runs as BFGS minimization of the negated objective with a backtracking
Armijo line search on values only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

Objective = Callable[[np.ndarray], tuple[float, "np.ndarray | None"]]

_BACKTRACK_FACTOR = 0.5
_ARMIJO_C = 1e-4
_INITIAL_STEP = 1.0
_MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class OptimizerResult:
    point: np.ndarray
    value: float
    iterations: int
    converged: bool


def maximize(
    objective: Objective,
    start,
    stop_delta: float,
    max_iters: int = 100,
) -> OptimizerResult:
    """Ascend ``objective`` from ``start`` until steps become small.

    Terminates successfully when the largest component change of an
    accepted step is at most ``stop_delta`` (also when the line search
    cannot improve the value at all, which is treated as a zero step).
    Returns ``converged=False`` if ``max_iters`` accepted steps did not
    get there. A non-finite objective value at ``start`` is an error;
    non-finite trial values during line search are treated as rejections,
    so the iterate never leaves the finite region.
    """
    if not stop_delta > 0.0:
        raise ValueError(f"stop_delta must be positive, got {stop_delta!r}")
    x = np.asarray(start, dtype=np.float64).copy()
    if x.ndim != 1:
        raise ValueError("start must be a 1-D point")
    value, gradient = objective(x)
    if not math.isfinite(value):
        raise ValueError(f"objective is not finite at the start point: {value!r}")
    gradient = np.asarray(gradient, dtype=np.float64)
    # work in minimization form: F = -objective
    neg_grad = -gradient
    inv_hessian = np.eye(len(x))
    for iteration in range(1, max_iters + 1):
        direction = -inv_hessian @ neg_grad
        slope = float(neg_grad @ direction)
        if slope >= 0.0:
            # numerically lost descent; fall back to steepest ascent
            direction = -neg_grad
            slope = -float(neg_grad @ neg_grad)
            if slope == 0.0:
                return OptimizerResult(x, value, iteration - 1, True)
        step = _INITIAL_STEP
        accepted = False
        for _ in range(_MAX_BACKTRACKS):
            x_new = x + step * direction
            value_new, gradient_new = objective(x_new)
            # strict inequality: once the possible improvement underflows
            # double precision (asymptotically flat ridges), every trial is
            # rejected and the current point is declared converged instead
            # of marching along the ridge forever
            if math.isfinite(value_new) and -value_new < -value + _ARMIJO_C * step * slope:
                accepted = True
                break
            step *= _BACKTRACK_FACTOR
        if not accepted:
            # no improving step exists at any tried scale: zero step
            return OptimizerResult(x, value, iteration - 1, True)
        delta = x_new - x
        gradient_new = np.asarray(gradient_new, dtype=np.float64)
        neg_grad_new = -gradient_new
        if float(np.max(np.abs(delta))) <= stop_delta:
            return OptimizerResult(x_new, value_new, iteration, True)
        y = neg_grad_new - neg_grad
        sy = float(delta @ y)
        if sy > 0.0:
            # standard two-sided inverse-Hessian update; skipping when
            # s.y <= 0 keeps the approximation positive definite
            rho = 1.0 / sy
            hy = inv_hessian @ y
            yhy = float(y @ hy)
            inv_hessian = (
                inv_hessian
                - rho * (np.outer(delta, hy) + np.outer(hy, delta))
                + rho * rho * (sy + yhy) * np.outer(delta, delta)
            )
        x, value, neg_grad = x_new, value_new, neg_grad_new
    return OptimizerResult(x, value, max_iters, False)

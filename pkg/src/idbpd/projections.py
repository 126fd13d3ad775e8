"""Euclidean projections and inexact inner maximization."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import kernels
from .problem_api import FeasibleSet, OracleError, as_finite_vector


@dataclass
class InnerMaxResult:
    maximizer: np.ndarray
    value: float
    steps_taken: int
    value_trajectory: Optional[np.ndarray] = None


def project_simplex(v) -> np.ndarray:
    """Project ``v`` onto the unit simplex ``{u >= 0, sum(u) = 1}``.

    Sort-and-threshold method: find the largest ``j`` with
    ``u_(j) - (sum_{i<=j} u_(i) - 1) / j > 0`` over the descending order
    statistics, then shift and clip.
    """
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape[0] == 0:
        raise ValueError("cannot project an empty vector")
    if not np.all(np.isfinite(arr)):
        raise ValueError("simplex projection input must be finite")
    return kernels.ACTIVE.project_simplex(np.ascontiguousarray(arr))


def project_set(v, feasible_set: FeasibleSet) -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64).reshape(-1)
    if arr.shape[0] != feasible_set.dim:
        raise ValueError(f"dimension mismatch: got {arr.shape[0]}, set has {feasible_set.dim}")
    kind = feasible_set.kind
    if kind == "whole-space":
        return arr.copy()
    if kind == "simplex":
        return project_simplex(arr)
    if kind == "box":
        return np.clip(arr, feasible_set.lower, feasible_set.upper)
    # ball
    offset = arr - feasible_set.center
    dist = float(np.linalg.norm(offset))
    if dist <= feasible_set.radius:
        return arr.copy()
    return feasible_set.center + offset * (feasible_set.radius / dist)


def closed_form_regularized_simplex_max(loss_vector, reg: float) -> tuple[np.ndarray, float]:
    """Maximize ``u @ loss - (reg*m/2) ||u - 1/m||^2`` over the simplex.

    Completing the square gives ``u* = P_simplex(1/m + loss/(reg*m))``.
    """
    if not reg > 0:
        raise ValueError("regularization must be positive")
    loss = np.asarray(loss_vector, dtype=np.float64).reshape(-1)
    m = loss.shape[0]
    strength = reg * m
    u = project_simplex(1.0 / m + loss / strength)
    dev = u - 1.0 / m
    value = float(u @ loss) - 0.5 * strength * float(dev @ dev)
    return u, value


def inner_maximize(h_value: Callable, h_grad: Callable, feasible_set: FeasibleSet, start,
                   steps: int, stepsize: float, momentum: bool = False,
                   record: bool = False) -> InnerMaxResult:
    """Projected gradient ascent on ``h`` over ``feasible_set``.

    With ``momentum`` the iterates use a Nesterov-style extrapolation with
    weight ``t / (t + 3)``. ``record`` keeps the value at the start and after
    every step.
    """
    if steps < 1:
        raise ValueError("inner maximization needs at least one step")
    if not stepsize > 0:
        raise ValueError("inner stepsize must be positive")
    u = project_set(start, feasible_set)
    traj = [float(h_value(u))] if record else None
    v = u
    for t in range(steps):
        g = np.asarray(h_grad(v), dtype=np.float64)
        if not np.all(np.isfinite(g)):
            raise OracleError("inner ascent gradient", f"step {t}")
        u_new = project_set(v + stepsize * g, feasible_set)
        if momentum:
            v = u_new + (t / (t + 3.0)) * (u_new - u)
        else:
            v = u_new
        u = u_new
        if record:
            traj.append(float(h_value(u)))
    value = traj[-1] if record else float(h_value(u))
    if not np.isfinite(value):
        raise OracleError("inner ascent value", f"after {steps} steps")
    return InnerMaxResult(u, value, steps, None if traj is None else np.array(traj))


def estimate_ascent_stepsize(h_value: Callable, h_grad: Callable, feasible_set: FeasibleSet,
                             start, initial: float = 1.0, max_trials: int = 40) -> float:
    """Doubling/halving search for a stepsize behaving like ``1/L``.

    A trial stepsize ``s`` is accepted when the projected step ``u1`` satisfies
    ``h(u1) >= h(u0) + g0 @ (u1 - u0) - ||u1 - u0||^2 / (2 s)``.
    """
    u0 = project_set(start, feasible_set)
    f0 = float(h_value(u0))
    g0 = as_finite_vector(h_grad(u0), "inner gradient")

    def accepted(s):
        u1 = project_set(u0 + s * g0, feasible_set)
        du = u1 - u0
        sq = float(du @ du)
        if sq == 0.0:
            return None
        lhs = float(h_value(u1))
        rhs = f0 + float(g0 @ du) - sq / (2.0 * s)
        return lhs >= rhs - 1e-12 * max(1.0, abs(f0))

    s = float(initial)
    first = accepted(s)
    if first is None:
        return s
    if first:
        for _ in range(max_trials):
            ok = accepted(2.0 * s)
            if not ok:
                break
            s *= 2.0
        return s
    for _ in range(max_trials):
        s *= 0.5
        if accepted(s):
            return s
    raise ArithmeticError("stepsize search failed to find an ascent step")

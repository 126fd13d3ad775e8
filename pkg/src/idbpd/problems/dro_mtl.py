"""Distributionally robust two-task learning with a task-2 loss constraint.

    phi(x, y) = sum_i y_i l1_i(x) - (lam n / 2) ||y - 1/n||^2,   y in simplex(n)
    psi(x, w) = sum_j w_j l2_j(x) - (lam m / 2) ||w - 1/m||^2 - r,  w in simplex(m)

where ``l1``/``l2`` are per-sample cross-entropy losses of a shared-trunk MLP.
Both inner maxima are available in closed form.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from ..problem_api import FeasibleSet, ProblemOracles, Smoothness
from ..projections import closed_form_regularized_simplex_max
from ..schedule import Schedule
from .data import DatasetSplit
from .mlp import MlpLayout, mlp_loss_and_grads

DEFAULT_LAMBDA_REG = 1e-3


def layout_for(split: DatasetSplit, hidden_width: int) -> MlpLayout:
    return MlpLayout(split.n_features, int(hidden_width), len(split.labels1), len(split.labels2))


class _ForwardCache:
    """Per-task forward passes memoized on the raw bytes of ``x``."""

    def __init__(self, split: DatasetSplit, layout: MlpLayout, size: int):
        self._data = {1: (split.features1, split.targets1), 2: (split.features2, split.targets2)}
        self._layout = layout
        self._cached = lru_cache(maxsize=size)(self._compute)

    def _compute(self, task, key):
        X, T = self._data[task]
        return mlp_loss_and_grads(np.frombuffer(key, dtype=np.float64), self._layout, X, T, task)

    def __call__(self, task: int, x):
        return self._cached(task, np.ascontiguousarray(x, dtype=np.float64).tobytes())


def _regularized_block(forward, task: int, count: int, lambda_reg: float, shift: float):
    """Value, gradients and closed-form max of ``u @ loss - (lam k/2)||u - 1/k||^2 - shift``."""
    strength = lambda_reg * count

    def value(x, u):
        losses, _ = forward(task, x)
        dev = u - 1.0 / count
        return float(u @ losses) - 0.5 * strength * float(dev @ dev) - shift

    def exact(x):
        u, val = closed_form_regularized_simplex_max(forward(task, x)[0], lambda_reg)
        return u, val - shift

    return (value,
            lambda x, u: forward(task, x)[1](u),
            lambda x, u: forward(task, x)[0] - strength * (u - 1.0 / count),
            exact, strength)


def make_dro_mtl(split: DatasetSplit, hidden_width: int = 16, lambda_reg: float = DEFAULT_LAMBDA_REG,
                 r: float = 0.0, cache_size: int = 8) -> ProblemOracles:
    if not lambda_reg > 0:
        raise ValueError("lambda_reg must be positive")
    if not np.isfinite(r):
        raise ValueError("threshold r must be finite")
    layout = layout_for(split, hidden_width)
    n, m = split.sizes
    forward = _ForwardCache(split, layout, cache_size)
    phi, gx_phi, gy_phi, exact_y, str_y = _regularized_block(forward, 1, n, lambda_reg, 0.0)
    psi, gx_psi, gw_psi, exact_w, str_w = _regularized_block(forward, 2, m, lambda_reg, float(r))
    return ProblemOracles(
        dim_x=layout.size,
        phi_value=phi, grad_x_phi=gx_phi, grad_y_phi=gy_phi,
        psi_value=psi, grad_x_psi=gx_psi, grad_w_psi=gw_psi,
        set_Y=FeasibleSet.simplex(n),
        set_W=FeasibleSet.simplex(m),
        smoothness=Smoothness(L_yy_phi=str_y, L_ww_psi=str_w, concavity_y=str_y, concavity_w=str_w),
        exact_inner_max_y=exact_y,
        exact_inner_max_w=exact_w,
        initial_point=layout.init,
        name="dro-mtl",
    )


def robust_task2_problem(split: DatasetSplit, hidden_width: int = 16,
                         lambda_reg: float = DEFAULT_LAMBDA_REG) -> ProblemOracles:
    """Robust task-2 training posed with an always-satisfied constraint.

    The task-2 objective takes the place of ``phi`` and ``psi`` is the
    constant ``-1`` on a one-point ``W``, so the barrier gate never opens and
    the multiplier stays zero. The weight layout matches :func:`make_dro_mtl`.
    """
    if not lambda_reg > 0:
        raise ValueError("lambda_reg must be positive")
    layout = layout_for(split, hidden_width)
    m = split.sizes[1]
    forward = _ForwardCache(split, layout, 8)
    phi, gx_phi, gy_phi, exact_y, str_y = _regularized_block(forward, 2, m, lambda_reg, 0.0)
    return ProblemOracles(
        dim_x=layout.size,
        phi_value=phi, grad_x_phi=gx_phi, grad_y_phi=gy_phi,
        psi_value=lambda x, w: -1.0,
        grad_x_psi=lambda x, w: np.zeros(layout.size),
        grad_w_psi=lambda x, w: np.zeros(1),
        set_Y=FeasibleSet.simplex(m),
        set_W=FeasibleSet.simplex(1),
        smoothness=Smoothness(L_yy_phi=str_y, L_ww_psi=1.0, concavity_y=str_y, concavity_w=1.0),
        exact_inner_max_y=exact_y,
        exact_inner_max_w=lambda x: (np.ones(1), -1.0),
        initial_point=layout.init,
        name="dro-task2",
    )


def calibrate_threshold(split: DatasetSplit, hidden_width: int = 16,
                        lambda_reg: float = DEFAULT_LAMBDA_REG, budget_iters: int = 200,
                        gamma: float = 1e-2, alpha_scale: float = 1.0, seed: int = 0) -> float:
    """Threshold ``r`` from a short robust training run on task 2 alone.

    Runs the primal-dual iteration with the constraint switched off for
    ``budget_iters`` steps from the seeded initial weights and returns the
    final regularized worst-case task-2 loss.
    """
    from ..solver import SolverConfig, solve

    if int(budget_iters) < 1:
        raise ValueError("budget_iters must be at least 1")
    prob = robust_task2_problem(split, hidden_width, lambda_reg)
    sched = Schedule(horizon=int(budget_iters), mode="practical", gamma=gamma, alpha_scale=alpha_scale)
    trace = solve(prob, SolverConfig(schedule=sched, seed=seed, record_stride=int(budget_iters)))
    value = float(prob.exact_inner_max_y(trace.final_x)[1])
    if not np.isfinite(value):
        raise ArithmeticError("threshold calibration diverged")
    return value

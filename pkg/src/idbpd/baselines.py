"""Comparison methods sharing the solver's oracle interface and trace format.

* GDMA: gradient descent multi-ascent on the penalized saddle problem
  ``min_x max_{y, w} phi(x, y) + rho * psi(x, w)``.
* Adaptive discretization: a Blankenship-Falk outer loop that keeps a finite
  working set of constraint indices ``w_i`` and solves each finite problem
  approximately with a gradient-descent / multiplier-ascent Lagrangian loop.

Budgets count ``x``-gradient evaluations (``grad_x_phi`` plus ``grad_x_psi``),
the backpropagation-sized work; dual ascent steps reuse cached losses.

Both record ``lam`` as the weight currently placed on the constraint
gradient (``rho`` for GDMA, ``sum_i lambda_i`` for discretization), which is
what the KKT residuals are evaluated with.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .metrics import implicit_value_and_grad
from .problem_api import OracleError, ProblemOracles, instrument
from .solver import (IterateTrace, SolverAbort, ascend_w, ascend_y, initial_points,
                     resolve_inner_stepsizes)

RHO_GRID = (1.0, 2.0, 5.0, 10.0)


@dataclass(frozen=True)
class GdmaConfig:
    rho: float = 1.0
    gamma: float = 1e-3
    ascent_steps: int = 10
    horizon: int = 1000
    record_stride: int = 1
    oracle_budget: Optional[int] = None

    def __post_init__(self):
        if self.oracle_budget is not None and int(self.oracle_budget) < 1:
            raise ValueError("oracle_budget must be positive")
        if not self.rho > 0:
            raise ValueError("penalty rho must be positive")
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if int(self.ascent_steps) < 1 or int(self.horizon) < 1 or int(self.record_stride) < 1:
            raise ValueError("ascent_steps, horizon and record_stride must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class DiscretizationConfig:
    outer_rounds: int = 20
    inner_pd_iterations: int = 50
    violation_tolerance: float = 1e-4
    multiplier_step: float = 1.0
    max_active_constraints: int = 50
    gamma: float = 1e-3
    record_stride: int = 1
    oracle_budget: Optional[int] = None

    def __post_init__(self):
        if self.oracle_budget is not None and int(self.oracle_budget) < 1:
            raise ValueError("oracle_budget must be positive")
        for name in ("outer_rounds", "inner_pd_iterations", "max_active_constraints", "record_stride"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        for name in ("violation_tolerance", "multiplier_step", "gamma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


def _over_budget(counter, budget) -> bool:
    return budget is not None and counter.as_dict()["primal_gradient_evals"] >= budget


def _abort(trace, counter, method, k, exc):
    trace.counts = counter.as_dict()
    return SolverAbort(f"{method} aborted at k={k}: {exc}", trace)


def gdma_solve(problem: ProblemOracles, config: GdmaConfig, x0=None, y0=None, w0=None,
               seed: int = 0) -> IterateTrace:
    """Gradient descent multi-ascent on ``phi + rho * psi``.

    Each iteration first takes ``ascent_steps`` warm-started projected ascent
    steps on ``y`` and on ``w`` at the current ``x``, then one descent step
    ``x <- x - gamma (grad_x phi + rho grad_x psi)``. The ``w`` ascent on
    ``rho * psi`` uses the stepsize ``1 / (rho L_ww)``, which moves ``w``
    exactly like ascent on ``psi`` with ``1 / L_ww``. With ``oracle_budget``
    set, iterations stop once the number of ``x``-gradient evaluations
    reaches it.
    """
    x, y, w = initial_points(problem, x0, y0, w0, seed)
    prob, counter = instrument(problem)
    rho, gamma = float(config.rho), float(config.gamma)
    trace = IterateTrace(method=f"gdma(rho={rho:g})", gamma=gamma, counts=counter.counts)
    trace.info.update(config=config.to_dict())
    stride = int(config.record_stride)
    t0 = time.monotonic_ns()
    step_y = step_w = None
    k = 0

    def record(k, x, y, w):
        gphi = prob.grad_x_phi(x, y)
        gpsi = prob.grad_x_psi(x, w)
        d = -(gphi + rho * gpsi)
        psi = prob.psi_value(x, w)
        rho_b = float(np.linalg.norm(gpsi))
        trace.append(k, x, y, w, rho, max(psi, 0.0) * rho_b, rho_b, np.linalg.norm(d),
                     np.linalg.norm(gphi), 0.0, psi, prob.phi_value(x, y), t0)
        return d

    try:
        for k in range(config.horizon):
            if _over_budget(counter, config.oracle_budget):
                break
            if step_y is None:
                step_y, step_w = resolve_inner_stepsizes(prob, x, y, w)
                trace.info.update(inner_stepsize_y=step_y, inner_stepsize_w=step_w)
            y = ascend_y(prob, x, y, config.ascent_steps, step_y, False)
            w = ascend_w(prob, x, w, config.ascent_steps, step_w, False)
            trace.inner_steps_y += config.ascent_steps
            trace.inner_steps_w += config.ascent_steps
            if k % stride == 0:
                d = record(k, x, y, w)
            else:
                d = -(prob.grad_x_phi(x, y) + rho * prob.grad_x_psi(x, w))
            x = x + gamma * d
            if not np.all(np.isfinite(x)):
                raise OracleError("primal iterate")
            dn = float(d @ d)
            trace.sum_gamma += gamma
            trace.sum_gamma_d2 += gamma * dn
            trace.iterations = k + 1
        if step_y is not None:
            y = ascend_y(prob, x, y, config.ascent_steps, step_y, False)
            w = ascend_w(prob, x, w, config.ascent_steps, step_w, False)
        record(trace.iterations, x, y, w)
    except OracleError as exc:
        raise _abort(trace, counter, "gdma", k, exc) from exc
    trace.counts = counter.as_dict()
    return trace


def adaptive_discretization_solve(problem: ProblemOracles, config: DiscretizationConfig,
                                  x0=None, y0=None, seed: int = 0,
                                  eval_steps: int = 500) -> IterateTrace:
    """Blankenship-Falk discretization with a Lagrangian primal-dual subsolver.

    The working set starts at the center of ``W``. Each round runs
    ``inner_pd_iterations`` of

    * ``x <- x - gamma (grad_x phi(x, y) + sum_i lambda_i grad_x psi(x, w_i))``
    * one projected ascent step on ``y``
    * ``lambda_i <- [lambda_i + multiplier_step * psi(x, w_i)]_+``

    and then maximizes ``psi(x, .)`` to evaluation grade. The maximizer joins
    the working set when its value exceeds ``violation_tolerance``; otherwise
    the run stops. Past ``max_active_constraints`` the oldest index and its
    multiplier are evicted. With ``oracle_budget`` set, the run also stops
    once the number of ``x``-gradient evaluations reaches it.
    """
    x, y, _ = initial_points(problem, x0, y0, None, seed)
    prob, counter = instrument(problem)
    gamma, eta = float(config.gamma), float(config.multiplier_step)
    trace = IterateTrace(method="discretization", gamma=gamma, counts=counter.counts)
    trace.info.update(config=config.to_dict(), active_set_sizes=[], rounds=0)
    stride = int(config.record_stride)
    t0 = time.monotonic_ns()
    W = [prob.set_W.center_point()]
    lams = [0.0]
    step_y = None
    k = 0

    def record(k, x, y, d, gphi, gpsis, psis):
        j = int(np.argmax(psis))
        rho_b = float(np.linalg.norm(gpsis[j]))
        trace.append(k, x, y, W[j], sum(lams), max(psis[j], 0.0) * rho_b, rho_b, np.linalg.norm(d),
                     np.linalg.norm(gphi), 0.0, psis[j], prob.phi_value(x, y), t0)

    def lagrangian_grad(x, y):
        gphi = prob.grad_x_phi(x, y)
        gpsis = [prob.grad_x_psi(x, wi) for wi in W]
        d = -gphi
        for li, gi in zip(lams, gpsis):
            if li > 0:
                d = d - li * gi
        return d, gphi, gpsis

    try:
        for rnd in range(config.outer_rounds):
            trace.info["active_set_sizes"].append(len(W))
            for _ in range(config.inner_pd_iterations):
                if _over_budget(counter, config.oracle_budget):
                    break
                if step_y is None:
                    step_y, _ = resolve_inner_stepsizes(prob, x, y, W[0])
                    trace.info.update(inner_stepsize_y=step_y)
                d, gphi, gpsis = lagrangian_grad(x, y)
                psis = [prob.psi_value(x, wi) for wi in W]
                if k % stride == 0:
                    record(k, x, y, d, gphi, gpsis, psis)
                x_new = x + gamma * d
                if not np.all(np.isfinite(x_new)):
                    raise OracleError("primal iterate")
                y = ascend_y(prob, x, y, 1, step_y, False)
                trace.inner_steps_y += 1
                lams = [max(li + eta * pi, 0.0) for li, pi in zip(lams, psis)]
                trace.sum_gamma += gamma
                trace.sum_gamma_d2 += gamma * float(d @ d)
                x = x_new
                k += 1
                trace.iterations = k
            trace.info["rounds"] = rnd + 1
            if _over_budget(counter, config.oracle_budget):
                break
            g_val, _, w_new = implicit_value_and_grad(prob, x, "g", eval_steps)
            if g_val <= config.violation_tolerance:
                break
            W.append(np.asarray(w_new, dtype=np.float64))
            lams.append(0.0)
            while len(W) > config.max_active_constraints:
                W.pop(0)
                lams.pop(0)
        d, gphi, gpsis = lagrangian_grad(x, y)
        record(k, x, y, d, gphi, gpsis, [prob.psi_value(x, wi) for wi in W])
    except OracleError as exc:
        raise _abort(trace, counter, "discretization", k, exc) from exc
    trace.info.update(final_active_set_size=len(W), multipliers=list(lams))
    trace.counts = counter.as_dict()
    return trace

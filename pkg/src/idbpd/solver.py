"""Outer loop of the inexact dynamic barrier primal-dual method."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .direction import DirectionResult, compute_direction
from .problem_api import OracleError, ProblemOracles, instrument
from .projections import estimate_ascent_stepsize, inner_maximize, project_set
from .schedule import Schedule, alpha_at, gamma_const, inner_steps

log = logging.getLogger(__name__)


class SolverAbort(RuntimeError):
    """Numeric failure inside a run; ``trace`` holds everything recorded so far."""

    def __init__(self, message: str, trace: "IterateTrace"):
        super().__init__(message)
        self.trace = trace


@dataclass
class IterateTrace:
    """Recorded iterates of one run.

    Entries sit at multiples of the record stride plus the final iterate,
    whose index equals the number of primal steps taken.
    """

    method: str
    gamma: float
    k: list = field(default_factory=list)
    x: list = field(default_factory=list)
    y: list = field(default_factory=list)
    w: list = field(default_factory=list)
    lam: list = field(default_factory=list)
    zeta: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    d_norm: list = field(default_factory=list)
    gphi_norm: list = field(default_factory=list)
    alpha: list = field(default_factory=list)
    psi_val: list = field(default_factory=list)
    phi_val: list = field(default_factory=list)
    wallclock_ns: list = field(default_factory=list)
    iterations: int = 0
    sum_gamma: float = 0.0
    sum_gamma_d2: float = 0.0
    inner_steps_y: int = 0
    inner_steps_w: int = 0
    counts: dict = field(default_factory=dict)
    info: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.k)

    def append(self, k, x, y, w, lam, zeta, rho, d_norm, gphi_norm, alpha, psi_val, phi_val, t0):
        self.k.append(int(k))
        self.x.append(np.array(x, copy=True))
        self.y.append(np.array(y, copy=True))
        self.w.append(np.array(w, copy=True))
        self.lam.append(float(lam))
        self.zeta.append(float(zeta))
        self.rho.append(float(rho))
        self.d_norm.append(float(d_norm))
        self.gphi_norm.append(float(gphi_norm))
        self.alpha.append(float(alpha))
        self.psi_val.append(float(psi_val))
        self.phi_val.append(float(phi_val))
        self.wallclock_ns.append(time.monotonic_ns() - t0)

    @property
    def final_x(self) -> np.ndarray:
        return self.x[-1]

    @property
    def stationarity_proxy(self) -> float:
        """``(1/Gamma_T) sum_k gamma_k ||d_k||^2`` over all primal steps."""
        return self.sum_gamma_d2 / self.sum_gamma if self.sum_gamma > 0 else float("nan")

    def numeric_rows(self) -> list[tuple]:
        """Everything except wall-clock time, for determinism checks."""
        rows = []
        for i in range(len(self.k)):
            rows.append((self.k[i], self.x[i].tobytes(), self.y[i].tobytes(), self.w[i].tobytes(),
                         self.lam[i], self.zeta[i], self.rho[i], self.d_norm[i],
                         self.psi_val[i], self.phi_val[i]))
        return rows


@dataclass
class SolverConfig:
    """Run configuration.

    ``inner="exact"`` replaces both inner ascents, including the initial dual
    points, by the problem's closed-form maximizers. ``gamma`` overrides the
    schedule's primal stepsize (``0`` freezes ``x``).
    """

    schedule: Schedule
    x0: Optional[np.ndarray] = None
    y0: Optional[np.ndarray] = None
    w0: Optional[np.ndarray] = None
    record_stride: int = 1
    momentum: bool = False
    seed: int = 0
    inner: str = "ascent"
    inner_stepsize_y: Optional[float] = None
    inner_stepsize_w: Optional[float] = None
    gamma: Optional[float] = None
    tol: Optional[float] = None

    def __post_init__(self):
        if int(self.record_stride) < 1:
            raise ValueError("record_stride must be at least 1")
        if self.inner not in ("ascent", "exact"):
            raise ValueError("inner must be 'ascent' or 'exact'")
        if self.gamma is not None and self.gamma < 0:
            raise ValueError("gamma override must be nonnegative")


def initial_points(problem: ProblemOracles, x0, y0, w0, seed: int):
    """Resolve and validate starting points; duals are projected onto their sets."""
    if x0 is None:
        x0 = problem_initial_x(problem, seed)
    x = np.array(x0, dtype=np.float64).reshape(-1)
    if x.shape[0] != problem.dim_x:
        raise ValueError(f"x0 has dimension {x.shape[0]}, problem expects {problem.dim_x}")
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    y = problem.set_Y.center_point() if y0 is None else np.asarray(y0, dtype=np.float64).reshape(-1)
    w = problem.set_W.center_point() if w0 is None else np.asarray(w0, dtype=np.float64).reshape(-1)
    return x, project_set(y, problem.set_Y), project_set(w, problem.set_W)


def problem_initial_x(problem: ProblemOracles, seed: int) -> np.ndarray:
    if problem.initial_point is not None:
        return np.asarray(problem.initial_point(seed), dtype=np.float64)
    return np.zeros(problem.dim_x)


def resolve_inner_stepsizes(problem: ProblemOracles, x, y, w, step_y=None, step_w=None):
    """``1/L_uu`` when known, otherwise a one-off line search at ``(x, y, w)``."""
    sm = problem.smoothness
    if step_y is None:
        if sm.L_yy_phi:
            step_y = 1.0 / sm.L_yy_phi
        else:
            step_y = estimate_ascent_stepsize(lambda v: problem.phi_value(x, v),
                                              lambda v: problem.grad_y_phi(x, v), problem.set_Y, y)
            log.debug("line-searched y stepsize %g", step_y)
    if step_w is None:
        if sm.L_ww_psi:
            step_w = 1.0 / sm.L_ww_psi
        else:
            step_w = estimate_ascent_stepsize(lambda v: problem.psi_value(x, v),
                                              lambda v: problem.grad_w_psi(x, v), problem.set_W, w)
            log.debug("line-searched w stepsize %g", step_w)
    return float(step_y), float(step_w)


def ascend_y(problem, x, y, steps, stepsize, momentum):
    return inner_maximize(lambda v: problem.phi_value(x, v), lambda v: problem.grad_y_phi(x, v),
                          problem.set_Y, y, steps, stepsize, momentum).maximizer


def ascend_w(problem, x, w, steps, stepsize, momentum):
    return inner_maximize(lambda v: problem.psi_value(x, v), lambda v: problem.grad_w_psi(x, v),
                          problem.set_W, w, steps, stepsize, momentum).maximizer


def solve(problem: ProblemOracles, config: SolverConfig) -> IterateTrace:
    """Run the primal-dual iteration for ``config.schedule.horizon`` steps.

    Each step computes the barrier direction at ``(x_k, y_k, w_k)``, moves
    ``x`` by ``gamma * d_k`` and then refreshes ``y`` and ``w`` by warm-started
    projected ascent at the new ``x``.
    """
    sched = config.schedule
    if config.inner == "exact" and (problem.exact_inner_max_y is None or problem.exact_inner_max_w is None):
        raise ValueError("inner='exact' needs closed-form inner maximizers")
    if config.gamma is not None:
        gamma = float(config.gamma)
    else:
        gamma = gamma_const(sched, problem.smoothness.primal_lipschitz_sum)
    x, y, w = initial_points(problem, config.x0, config.y0, config.w0, config.seed)
    prob, counter = instrument(problem)
    trace = IterateTrace(method="idbpd", gamma=gamma, counts=counter.counts)
    trace.info.update(schedule=sched.to_dict(), inner=config.inner, momentum=config.momentum)
    t0 = time.monotonic_ns()
    exact = config.inner == "exact"
    step_y, step_w = config.inner_stepsize_y, config.inner_stepsize_w
    stride = int(config.record_stride)
    k = 0

    def direction_at(x, y, w, alpha) -> tuple[DirectionResult, np.ndarray, float]:
        gphi = prob.grad_x_phi(x, y)
        gpsi = prob.grad_x_psi(x, w)
        psi = prob.psi_value(x, w)
        return compute_direction(gphi, gpsi, psi, alpha), gphi, psi

    try:
        if exact:
            y = prob.exact_inner_max_y(x)[0]
            w = prob.exact_inner_max_w(x)[0]
        stopped = False
        for k in range(sched.horizon):
            alpha = alpha_at(sched, k)
            dr, gphi, psi = direction_at(x, y, w, alpha)
            d_norm = dr.d_norm
            if k % stride == 0:
                trace.append(k, x, y, w, dr.lam, dr.zeta, dr.rho, d_norm, np.linalg.norm(gphi),
                             alpha, psi, prob.phi_value(x, y), t0)
            if config.tol is not None and max(d_norm, max(psi, 0.0)) <= config.tol:
                stopped = True
                break
            x = x + gamma * dr.d
            if not np.all(np.isfinite(x)):
                raise OracleError("primal iterate")
            trace.sum_gamma += gamma
            trace.sum_gamma_d2 += gamma * d_norm * d_norm
            if exact:
                y = prob.exact_inner_max_y(x)[0]
                w = prob.exact_inner_max_w(x)[0]
            else:
                if step_y is None or step_w is None:
                    step_y, step_w = resolve_inner_stepsizes(prob, x, y, w, step_y, step_w)
                    trace.info.update(inner_stepsize_y=step_y, inner_stepsize_w=step_w)
                n_k = inner_steps(sched, k, "y")
                psi_plus = max(psi, 0.0) if dr.zeta > 0 else None
                m_k = inner_steps(sched, k, "w", psi_plus)
                y = ascend_y(prob, x, y, n_k, step_y, config.momentum)
                w = ascend_w(prob, x, w, m_k, step_w, config.momentum)
                trace.inner_steps_y += n_k
                trace.inner_steps_w += m_k
            trace.iterations = k + 1
        final_k = trace.iterations
        if not (stopped and trace.k and trace.k[-1] == final_k):
            alpha = alpha_at(sched, min(final_k, sched.horizon - 1))
            dr, gphi, psi = direction_at(x, y, w, alpha)
            trace.append(final_k, x, y, w, dr.lam, dr.zeta, dr.rho, dr.d_norm, np.linalg.norm(gphi),
                         alpha, psi, prob.phi_value(x, y), t0)
    except OracleError as exc:
        trace.counts = counter.as_dict()
        raise SolverAbort(f"idbpd aborted at k={k}: {exc}", trace) from exc
    trace.counts = counter.as_dict()
    return trace


@dataclass
class FixedPointReport:
    d_norm: float
    lam: float
    gated_d_norm: float
    gated_lam: float
    g_value: float


def run_fixed_point_check(problem: ProblemOracles, config: SolverConfig, x_kkt,
                          eval_steps: int = 500, alpha: float = 0.0,
                          active_tol: float = 1e-8) -> FixedPointReport:
    """One direction evaluation at a candidate KKT point.

    Duals are replaced by evaluation-grade maximizers. The main figures treat
    the constraint as active when ``g(x) >= -active_tol`` so that an exact
    boundary point, where the strict indicator gate is closed, still reports
    the projected direction; the strictly gated values are reported as well.
    """
    from .metrics import implicit_value_and_grad

    x = np.asarray(x_kkt, dtype=np.float64).reshape(-1)
    _, gphi, _ = implicit_value_and_grad(problem, x, "f", eval_steps)
    g_val, gpsi, _ = implicit_value_and_grad(problem, x, "g", eval_steps)
    gated = compute_direction(gphi, gpsi, g_val, alpha)
    if g_val >= -active_tol:
        shifted = compute_direction(gphi, gpsi, max(g_val, 0.0) + 1.0, alpha)
    else:
        shifted = gated
    return FixedPointReport(shifted.d_norm, shifted.lam, gated.d_norm, gated.lam, g_val)

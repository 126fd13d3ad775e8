"""Evaluation-grade implicit functions and approximate-KKT residuals.

``f(x) = max_y phi(x, y)`` and ``g(x) = max_w psi(x, w)`` are evaluated with the
closed-form maximizers when a problem supplies them and with long projected
ascent runs otherwise. Gradients follow Danskin: ``grad f(x) = grad_x phi(x, y*)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from .problem_api import OracleError, ProblemOracles
from .projections import estimate_ascent_stepsize, inner_maximize

DEFAULT_EVAL_STEPS = 500


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    infeasibility: float
    slackness: float
    f_value: float
    g_value: float
    eval_inner_steps: int

    @property
    def worst(self) -> float:
        return max(self.stationarity, self.infeasibility, self.slackness)

    def to_dict(self) -> dict:
        return asdict(self)


def _blocks(problem: ProblemOracles, which: str):
    if which == "f":
        return (problem.phi_value, problem.grad_x_phi, problem.grad_y_phi, problem.set_Y,
                problem.exact_inner_max_y, problem.smoothness.L_yy_phi)
    if which == "g":
        return (problem.psi_value, problem.grad_x_psi, problem.grad_w_psi, problem.set_W,
                problem.exact_inner_max_w, problem.smoothness.L_ww_psi)
    raise ValueError("which must be 'f' or 'g'")


def implicit_value_and_grad(problem: ProblemOracles, x, which: str,
                            eval_steps: int = DEFAULT_EVAL_STEPS, use_exact: bool = True):
    """Return ``(value, gradient, maximizer)`` of ``f`` or ``g`` at ``x``."""
    value_fn, grad_x, grad_u, uset, exact, lip = _blocks(problem, which)
    x = np.asarray(x, dtype=np.float64).reshape(-1)
    if exact is not None and use_exact:
        u, value = exact(x)
        u = np.asarray(u, dtype=np.float64)
        value = float(value)
        steps = 0
    else:
        if eval_steps < 1:
            raise ValueError("eval_steps must be at least 1 without a closed-form maximizer")
        start = uset.center_point()
        h = lambda v: value_fn(x, v)  # noqa: E731
        hg = lambda v: grad_u(x, v)  # noqa: E731
        step = 1.0 / lip if lip else estimate_ascent_stepsize(h, hg, uset, start)
        res = inner_maximize(h, hg, uset, start, eval_steps, step)
        u, value, steps = res.maximizer, res.value, eval_steps
    if not np.isfinite(value):
        raise OracleError(f"implicit {which} value")
    grad = np.asarray(grad_x(x, u), dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise OracleError(f"implicit {which} gradient")
    return value, grad, u


def kkt_residuals(problem: ProblemOracles, x, lam: float,
                  eval_steps: int = DEFAULT_EVAL_STEPS) -> KktReport:
    if lam < 0:
        raise ValueError("multiplier must be nonnegative")
    f_val, gf, _ = implicit_value_and_grad(problem, x, "f", eval_steps)
    g_val, gg, _ = implicit_value_and_grad(problem, x, "g", eval_steps)
    used = 0 if problem.exact_inner_max_y is not None and problem.exact_inner_max_w is not None else eval_steps
    return KktReport(
        stationarity=float(np.linalg.norm(gf + lam * gg)),
        infeasibility=max(g_val, 0.0),
        slackness=abs(lam * g_val),
        f_value=f_val,
        g_value=g_val,
        eval_inner_steps=used,
    )


def trace_reports(trace, problem: ProblemOracles, eval_steps: int = DEFAULT_EVAL_STEPS) -> list[KktReport]:
    """KKT report at every recorded iterate, using the run's own multipliers."""
    return [kkt_residuals(problem, trace.x[i], trace.lam[i], eval_steps) for i in range(len(trace.k))]


def argmin_worst(ks: Sequence[int], worst: Sequence[float]) -> int:
    """Position of the smallest worst-residual; ties go to the smaller ``k``."""
    if len(ks) == 0:
        raise ValueError("empty trace")
    best = 0
    for i in range(1, len(ks)):
        if worst[i] < worst[best] or (worst[i] == worst[best] and ks[i] < ks[best]):
            best = i
    return best


def best_iterate(trace, problem: ProblemOracles, eval_steps: int = DEFAULT_EVAL_STEPS,
                 reports: Sequence[KktReport] | None = None) -> tuple[int, KktReport]:
    """Recorded iterate minimizing ``max(stationarity, infeasibility, slackness)``.

    Returns the iteration index ``k`` of that entry and its report.
    """
    if len(trace.k) == 0:
        raise ValueError("empty trace")
    if reports is None:
        reports = trace_reports(trace, problem, eval_steps)
    pos = argmin_worst(trace.k, [r.worst for r in reports])
    return trace.k[pos], reports[pos]

"""Inexact dynamic barrier primal-dual method for semi-infinite min-max problems.

Solve ``min_x max_y phi(x, y)`` subject to ``psi(x, w) <= 0`` for all
``w`` in ``W`` from value/gradient oracles. See :func:`idbpd.solver.solve`.
"""

from ._accel import BACKEND
from .baselines import DiscretizationConfig, GdmaConfig, adaptive_discretization_solve, gdma_solve
from .direction import DirectionResult, compute_direction
from .metrics import KktReport, best_iterate, implicit_value_and_grad, kkt_residuals
from .problem_api import (FeasibleSet, OracleCounter, OracleError, ProblemOracles, Smoothness,
                          check_gradient, instrument)
from .projections import (closed_form_regularized_simplex_max, inner_maximize, project_set,
                          project_simplex)
from .schedule import Schedule, alpha_at, gamma_const, inner_steps
from .solver import IterateTrace, SolverAbort, SolverConfig, run_fixed_point_check, solve

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiscretizationConfig", "GdmaConfig", "adaptive_discretization_solve", "gdma_solve",
    "DirectionResult", "compute_direction",
    "KktReport", "best_iterate", "implicit_value_and_grad", "kkt_residuals",
    "FeasibleSet", "OracleCounter", "OracleError", "ProblemOracles", "Smoothness",
    "check_gradient", "instrument",
    "closed_form_regularized_simplex_max", "inner_maximize", "project_set", "project_simplex",
    "Schedule", "alpha_at", "gamma_const", "inner_steps",
    "IterateTrace", "SolverAbort", "SolverConfig", "run_fixed_point_check", "solve",
]

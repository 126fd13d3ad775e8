"""Closed-form search direction of the dynamic-barrier QP.

At ``(x_k, y_k, w_k)`` the direction solves

    min_d ||d + gphi||^2  s.t.  gpsi @ d + alpha * ||gpsi|| <= 0

whenever the indicator ``[psi]_+ * ||gpsi||`` is positive, and is ``-gphi``
otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .problem_api import OracleError, as_finite_scalar, as_finite_vector


@dataclass(frozen=True)
class DirectionResult:
    d: np.ndarray
    lam: float
    zeta: float
    rho: float

    @property
    def constraint_active(self) -> bool:
        return self.zeta > 0.0

    @property
    def d_norm(self) -> float:
        return float(np.linalg.norm(self.d))


def barrier_rho(gpsi) -> float:
    """Dynamic barrier: the Euclidean norm of the constraint gradient."""
    g = as_finite_vector(gpsi, "constraint gradient")
    scale = float(np.max(np.abs(g))) if g.size else 0.0
    if scale == 0.0:
        return 0.0
    r = g / scale
    return scale * math.sqrt(float(r @ r))


def indicator_zeta(psi_val: float, gpsi) -> float:
    psi_val = as_finite_scalar(psi_val, "constraint value")
    return max(psi_val, 0.0) * barrier_rho(gpsi)


def compute_direction(gphi, gpsi, psi_val: float, alpha: float) -> DirectionResult:
    gphi = as_finite_vector(gphi, "objective gradient")
    gpsi = as_finite_vector(gpsi, "constraint gradient")
    psi_val = as_finite_scalar(psi_val, "constraint value")
    alpha = as_finite_scalar(alpha, "alpha")
    if alpha < 0:
        raise ValueError("alpha must be nonnegative")
    if gphi.shape != gpsi.shape:
        raise ValueError("gradient dimensions differ")
    d, lam, zeta, rho, status = kernels.ACTIVE.direction(gphi, gpsi, psi_val, alpha)
    if status == kernels.DIRECTION_UNDERFLOW:
        raise OracleError("multiplier", "squared constraint-gradient norm underflowed while the indicator is positive")
    return DirectionResult(np.asarray(d), float(lam), float(zeta), float(rho))

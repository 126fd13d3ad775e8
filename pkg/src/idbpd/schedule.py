"""Per-iteration parameters: barrier weight, primal stepsize, inner step counts.

Two modes:

* ``theory``: ``alpha_k = a * T^(1/3) / (k+2)^(1+omega)``, constant
  ``gamma = min(c / T^(1/3), 1 / (L_f + L_xy))`` and logarithmic inner step
  counts driven by contraction factors ``delta_y``, ``delta_w``.
* ``practical``: ``alpha_k = a / (k+2)^1.001``, a tuned constant ``gamma`` and
  ``N_k = base_y * ceil(log(k+2))``, ``M_k = base_w * ceil(log(k+2))``.

Logs are natural. Step counts are floored at 1 and capped at
``max_inner_steps``.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

ALPHA_GRID = (0.1, 0.2, 0.5, 1.0)
GAMMA_GRID = (1e-4, 2.5e-4, 5e-4, 1e-3, 5e-3, 1e-2)
PRACTICAL_EXPONENT = 1.001


@dataclass(frozen=True)
class Schedule:
    horizon: int
    mode: str = "practical"
    omega: float = 0.001
    alpha_scale: float = 1.0
    gamma: float = 1e-3
    gamma_scale: float = 1.0
    theta: float = 0.5
    delta_y: float = 0.9
    delta_w: float = 0.9
    inner_base_y: float = 2.0
    inner_base_w: float = 10.0
    max_inner_steps: int = 10_000

    def __post_init__(self):
        if self.mode not in ("theory", "practical"):
            raise ValueError(f"unknown schedule mode {self.mode!r}")
        if int(self.horizon) < 1:
            raise ValueError("horizon T must be at least 1")
        if not self.omega > 0:
            raise ValueError("omega must be positive")
        if not self.alpha_scale > 0:
            raise ValueError("alpha_scale must be positive")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1]")
        if not self.gamma_scale > 0:
            raise ValueError("gamma_scale must be positive")
        if not 0 < self.theta < 1:
            raise ValueError("theta must lie in (0, 1)")
        for name in ("delta_y", "delta_w"):
            if not 0 < getattr(self, name) < 1:
                raise ValueError(f"{name} must lie in (0, 1)")
        if not (self.inner_base_y > 0 and self.inner_base_w > 0):
            raise ValueError("inner step bases must be positive")
        if int(self.max_inner_steps) < 1:
            raise ValueError("max_inner_steps must be at least 1")

    def to_dict(self) -> dict:
        return asdict(self)


def alpha_at(s: Schedule, k: int) -> float:
    if not 0 <= k < s.horizon:
        raise IndexError(f"iteration {k} outside [0, {s.horizon})")
    if s.mode == "theory":
        return s.alpha_scale * s.horizon ** (1.0 / 3.0) / (k + 2.0) ** (1.0 + s.omega)
    return s.alpha_scale / (k + 2.0) ** PRACTICAL_EXPONENT


def gamma_const(s: Schedule, lip_sum: Optional[float] = None) -> float:
    """Constant primal stepsize; ``lip_sum`` is ``L_f + L_xy^phi``."""
    if s.mode == "practical":
        return s.gamma
    if lip_sum is None or not lip_sum > 0:
        raise ValueError("theory mode needs a positive L_f + L_xy^phi")
    return min(s.gamma_scale / s.horizon ** (1.0 / 3.0), 1.0 / lip_sum)


def _clamp_steps(s: Schedule, raw: float) -> int:
    if not math.isfinite(raw):
        return s.max_inner_steps if raw > 0 else 1
    return int(min(max(math.ceil(raw - 1e-12), 1), s.max_inner_steps))


def inner_steps(s: Schedule, k: int, which: str, psi_plus: Optional[float] = None) -> int:
    """Number of inner ascent steps at iteration ``k`` for block ``which``.

    In theory mode the ``w`` block takes the ``[psi]_+``-dependent branch when
    ``psi_plus`` is a positive number, i.e. when the indicator is positive.
    """
    if k < 0:
        raise ValueError("iteration index must be nonnegative")
    if which not in ("y", "w"):
        raise ValueError("which must be 'y' or 'w'")
    if s.mode == "practical":
        base = s.inner_base_y if which == "y" else s.inner_base_w
        return _clamp_steps(s, base * math.ceil(math.log(k + 2.0)))
    if which == "y":
        return _clamp_steps(s, 2.0 / (1.0 - s.delta_y) * math.log(k + 1.0))
    log_t = math.log(s.horizon)
    base = max(1.0, 1.0 / (2.0 * s.theta)) * log_t
    if psi_plus is not None and psi_plus > 0:
        branch = log_t + (4.0 * s.theta - 2.0) * math.log(psi_plus)
        base = max(base, branch)
    return _clamp_steps(s, base / (1.0 - s.delta_w))

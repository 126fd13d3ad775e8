"""Oracle interface for semi-infinite min-max problems.

A problem is ``min_x max_{y in Y} phi(x, y)`` subject to ``psi(x, w) <= 0`` for
every ``w in W``. Instances hand the solvers a :class:`ProblemOracles` bundle of
value/gradient callbacks plus descriptors of ``Y`` and ``W``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

Vector = np.ndarray


class OracleError(ArithmeticError):
    """An oracle produced a non-finite value."""

    def __init__(self, quantity: str, detail: str = ""):
        self.quantity = quantity
        msg = f"non-finite {quantity}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


def as_finite_vector(v, quantity: str = "vector") -> Vector:
    arr = np.array(v, dtype=np.float64, copy=True).reshape(-1)
    if not np.all(np.isfinite(arr)):
        raise OracleError(quantity)
    return arr


def as_finite_scalar(v, quantity: str = "value") -> float:
    val = float(v)
    if not np.isfinite(val):
        raise OracleError(quantity)
    return val


@dataclass(frozen=True)
class FeasibleSet:
    """Closed convex set with a cheap Euclidean projection.

    Use the constructors :meth:`whole_space`, :meth:`simplex`, :meth:`box` and
    :meth:`ball` rather than building one directly.
    """

    kind: str
    dim: int
    lower: Optional[Vector] = None
    upper: Optional[Vector] = None
    center: Optional[Vector] = None
    radius: Optional[float] = None

    KINDS = ("whole-space", "simplex", "box", "ball")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if int(self.dim) < 1:
            raise ValueError("set dimension must be positive")
        if self.kind == "box":
            if self.lower is None or self.upper is None:
                raise ValueError("box needs lower and upper bounds")
            if self.lower.shape != (self.dim,) or self.upper.shape != (self.dim,):
                raise ValueError("box bounds must match the dimension")
            if np.any(self.lower > self.upper):
                raise ValueError("box requires lower <= upper componentwise")
        if self.kind == "ball":
            if self.center is None or self.center.shape != (self.dim,):
                raise ValueError("ball center must match the dimension")
            if self.radius is None or not self.radius > 0:
                raise ValueError("ball radius must be positive")

    @classmethod
    def whole_space(cls, dim: int) -> "FeasibleSet":
        return cls("whole-space", int(dim))

    @classmethod
    def simplex(cls, dim: int) -> "FeasibleSet":
        return cls("simplex", int(dim))

    @classmethod
    def box(cls, lower, upper) -> "FeasibleSet":
        lo = np.asarray(lower, dtype=float).reshape(-1)
        hi = np.asarray(upper, dtype=float).reshape(-1)
        return cls("box", lo.shape[0], lower=lo, upper=hi)

    @classmethod
    def ball(cls, center, radius: float) -> "FeasibleSet":
        cen = np.asarray(center, dtype=float).reshape(-1)
        return cls("ball", cen.shape[0], center=cen, radius=float(radius))

    def center_point(self) -> Vector:
        """Canonical starting point inside the set."""
        if self.kind == "simplex":
            return np.full(self.dim, 1.0 / self.dim)
        if self.kind == "box":
            lo = np.where(np.isfinite(self.lower), self.lower, 0.0)
            hi = np.where(np.isfinite(self.upper), self.upper, 0.0)
            mid = np.where(np.isfinite(self.lower) & np.isfinite(self.upper),
                           0.5 * (lo + hi), np.clip(0.0, self.lower, self.upper))
            return mid
        if self.kind == "ball":
            return self.center.copy()
        return np.zeros(self.dim)

    def to_dict(self) -> dict:
        out = {"kind": self.kind, "dim": self.dim}
        if self.kind == "box":
            out.update(lower=self.lower.tolist(), upper=self.upper.tolist())
        if self.kind == "ball":
            out.update(center=self.center.tolist(), radius=self.radius)
        return out


@dataclass(frozen=True)
class Smoothness:
    """Optional smoothness and curvature constants of ``phi`` and ``psi``.

    ``concavity_y``/``concavity_w`` hold the strong-concavity modulus, or the
    squared PL constant when the dual set is the whole space. Unknown entries
    stay ``None``; solvers then fall back to line-searched inner stepsizes.
    """

    L_xx_phi: Optional[float] = None
    L_xy_phi: Optional[float] = None
    L_yy_phi: Optional[float] = None
    L_xx_psi: Optional[float] = None
    L_xw_psi: Optional[float] = None
    L_ww_psi: Optional[float] = None
    concavity_y: Optional[float] = None
    concavity_w: Optional[float] = None

    def __post_init__(self):
        for name in ("L_xy_phi", "L_xw_psi", "concavity_y", "concavity_w"):
            val = getattr(self, name)
            if val is not None and not val > 0:
                raise ValueError(f"{name} must be positive when supplied")
        for name in ("L_xx_phi", "L_yy_phi", "L_xx_psi", "L_ww_psi"):
            val = getattr(self, name)
            if val is not None and val < 0:
                raise ValueError(f"{name} must be nonnegative when supplied")

    @property
    def L_f(self) -> Optional[float]:
        """Lipschitz constant of the gradient of ``f(x) = max_y phi(x, y)``."""
        if None in (self.L_yy_phi, self.L_xy_phi, self.concavity_y):
            return None
        return self.L_yy_phi + self.L_xy_phi ** 2 / self.concavity_y

    @property
    def L_g(self) -> Optional[float]:
        if None in (self.L_ww_psi, self.L_xw_psi, self.concavity_w):
            return None
        return self.L_ww_psi + self.L_xw_psi ** 2 / self.concavity_w

    @property
    def primal_lipschitz_sum(self) -> Optional[float]:
        """``L_f + L_xy^phi``, the quantity bounding the primal stepsize."""
        lf = self.L_f
        return None if lf is None else lf + self.L_xy_phi


@dataclass(frozen=True)
class ProblemOracles:
    """Callbacks and set descriptors of one problem instance.

    Gradient callbacks return fresh arrays. ``exact_inner_max_y`` maps ``x`` to
    ``(y*, f(x))`` and ``exact_inner_max_w`` maps ``x`` to ``(w*, g(x))`` when a
    closed form exists. ``initial_point`` maps a seed to a starting ``x``.
    """

    dim_x: int
    phi_value: Callable[[Vector, Vector], float]
    grad_x_phi: Callable[[Vector, Vector], Vector]
    grad_y_phi: Callable[[Vector, Vector], Vector]
    psi_value: Callable[[Vector, Vector], float]
    grad_x_psi: Callable[[Vector, Vector], Vector]
    grad_w_psi: Callable[[Vector, Vector], Vector]
    set_Y: FeasibleSet
    set_W: FeasibleSet
    smoothness: Smoothness = field(default_factory=Smoothness)
    exact_inner_max_y: Optional[Callable[[Vector], tuple]] = None
    exact_inner_max_w: Optional[Callable[[Vector], tuple]] = None
    initial_point: Optional[Callable[[int], Vector]] = None
    name: str = "problem"

    @property
    def dim_y(self) -> int:
        return self.set_Y.dim

    @property
    def dim_w(self) -> int:
        return self.set_W.dim


ORACLE_NAMES = ("phi_value", "grad_x_phi", "grad_y_phi",
                "psi_value", "grad_x_psi", "grad_w_psi",
                "exact_inner_max_y", "exact_inner_max_w")


class OracleCounter:
    """Per-run tally of oracle invocations."""

    def __init__(self):
        self.counts = {name: 0 for name in ORACLE_NAMES}

    def as_dict(self) -> dict:
        out = dict(self.counts)
        out["value_evals"] = self.counts["phi_value"] + self.counts["psi_value"]
        out["gradient_evals"] = sum(self.counts[k] for k in ORACLE_NAMES if k.startswith("grad"))
        out["primal_gradient_evals"] = self.counts["grad_x_phi"] + self.counts["grad_x_psi"]
        out["total"] = sum(self.counts.values())
        return out


def instrument(problem: ProblemOracles) -> tuple[ProblemOracles, OracleCounter]:
    """Wrap every callback with call counting and finiteness checks.

    The returned bundle raises :class:`OracleError` on any NaN/Inf output.
    """
    counter = OracleCounter()
    counts = counter.counts

    def scalar(name, fn):
        def wrapped(x, u):
            counts[name] += 1
            return as_finite_scalar(fn(x, u), name)
        return wrapped

    def vector(name, fn, size):
        def wrapped(x, u):
            counts[name] += 1
            out = as_finite_vector(fn(x, u), name)
            if out.shape[0] != size:
                raise ValueError(f"{name} returned length {out.shape[0]}, expected {size}")
            return out
        return wrapped

    def inner(name, fn):
        if fn is None:
            return None

        def wrapped(x):
            counts[name] += 1
            u, val = fn(x)
            return as_finite_vector(u, name), as_finite_scalar(val, name)
        return wrapped

    wrapped = dataclasses.replace(
        problem,
        phi_value=scalar("phi_value", problem.phi_value),
        grad_x_phi=vector("grad_x_phi", problem.grad_x_phi, problem.dim_x),
        grad_y_phi=vector("grad_y_phi", problem.grad_y_phi, problem.dim_y),
        psi_value=scalar("psi_value", problem.psi_value),
        grad_x_psi=vector("grad_x_psi", problem.grad_x_psi, problem.dim_x),
        grad_w_psi=vector("grad_w_psi", problem.grad_w_psi, problem.dim_w),
        exact_inner_max_y=inner("exact_inner_max_y", problem.exact_inner_max_y),
        exact_inner_max_w=inner("exact_inner_max_w", problem.exact_inner_max_w),
    )
    return wrapped, counter


def check_gradient(value_fn: Callable[[Vector], float], grad_fn: Callable[[Vector], Vector],
                   point, step: float = 1e-5) -> float:
    """Compare an analytic gradient against central differences.

    Returns ``max_i |fd_i - g_i| / (1 + |g_i|)``.
    """
    if not step > 0:
        raise ValueError("finite-difference step must be positive")
    x = as_finite_vector(point, "point")
    g = as_finite_vector(grad_fn(x.copy()), "analytic gradient")
    if g.shape != x.shape:
        raise ValueError("gradient shape does not match the point")
    worst = 0.0
    e = np.zeros_like(x)
    for i in range(x.shape[0]):
        e[i] = step
        hi = as_finite_scalar(value_fn(x + e), "value")
        lo = as_finite_scalar(value_fn(x - e), "value")
        e[i] = 0.0
        fd = (hi - lo) / (2.0 * step)
        worst = max(worst, abs(fd - g[i]) / (1.0 + abs(g[i])))
    return worst


def oracle_gradient_errors(problem: ProblemOracles, x, y, w, step: float = 1e-5) -> dict:
    """Run :func:`check_gradient` on all four partial gradients at ``(x, y, w)``."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    w = np.asarray(w, float)
    return {
        "grad_x_phi": check_gradient(lambda v: problem.phi_value(v, y),
                                     lambda v: problem.grad_x_phi(v, y), x, step),
        "grad_y_phi": check_gradient(lambda v: problem.phi_value(x, v),
                                     lambda v: problem.grad_y_phi(x, v), y, step),
        "grad_x_psi": check_gradient(lambda v: problem.psi_value(v, w),
                                     lambda v: problem.grad_x_psi(v, w), x, step),
        "grad_w_psi": check_gradient(lambda v: problem.psi_value(x, v),
                                     lambda v: problem.grad_w_psi(x, v), w, step),
    }

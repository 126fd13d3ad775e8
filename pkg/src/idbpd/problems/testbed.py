"""Quadratic testbed with closed-form inner maxima and a brute-force KKT oracle.

    phi(x, y) = y @ (A x + b) - (eta/2) ||y||^2,          Y = R^m
    psi(x, w) = w @ (C x - c) - (reg*l/2) ||w - 1/l||^2 - r,  W = simplex(l)

so ``f(x) = ||A x + b||^2 / (2 eta)`` and ``g`` is a regularized max of the
affine pieces ``C x - c`` shifted by ``-r``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from ..metrics import kkt_residuals
from ..problem_api import FeasibleSet, ProblemOracles, Smoothness
from ..projections import closed_form_regularized_simplex_max


@dataclass(frozen=True)
class QuadraticTestbed:
    A: np.ndarray
    b: np.ndarray
    C: np.ndarray
    c: np.ndarray
    eta: float = 1.0
    reg: float = 0.5
    r: float = 0.0

    def __post_init__(self):
        if not self.eta > 0:
            raise ValueError("eta must be positive")
        if not self.reg > 0:
            raise ValueError("reg must be positive")
        if self.A.shape[0] != self.b.shape[0] or self.C.shape[0] != self.c.shape[0]:
            raise ValueError("inconsistent testbed shapes")
        if self.A.shape[1] != self.C.shape[1]:
            raise ValueError("A and C must act on the same x")

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def m(self) -> int:
        return self.A.shape[0]

    @property
    def l(self) -> int:
        return self.C.shape[0]

    # closed forms -----------------------------------------------------------

    def f(self, x) -> float:
        z = self.A @ x + self.b
        return float(z @ z) / (2.0 * self.eta)

    def grad_f(self, x) -> np.ndarray:
        return self.A.T @ (self.A @ x + self.b) / self.eta

    def y_star(self, x) -> np.ndarray:
        return (self.A @ x + self.b) / self.eta

    def w_star_and_g(self, x) -> tuple[np.ndarray, float]:
        w, val = closed_form_regularized_simplex_max(self.C @ x - self.c, self.reg)
        return w, val - self.r

    def g(self, x) -> float:
        return self.w_star_and_g(x)[1]

    def grad_g(self, x) -> np.ndarray:
        return self.C.T @ self.w_star_and_g(x)[0]

    def smoothness(self) -> Smoothness:
        strength = self.reg * self.l
        return Smoothness(
            L_xx_phi=0.0, L_xy_phi=max(float(np.linalg.norm(self.A, 2)), 1e-12), L_yy_phi=self.eta,
            L_xx_psi=0.0, L_xw_psi=max(float(np.linalg.norm(self.C, 2)), 1e-12), L_ww_psi=strength,
            concavity_y=self.eta, concavity_w=strength,
        )

    def oracles(self) -> ProblemOracles:
        A, b, C, c, eta, r = self.A, self.b, self.C, self.c, self.eta, self.r
        strength = self.reg * self.l
        center = 1.0 / self.l

        def phi_value(x, y):
            return float(y @ (A @ x + b)) - 0.5 * eta * float(y @ y)

        def psi_value(x, w):
            dev = w - center
            return float(w @ (C @ x - c)) - 0.5 * strength * float(dev @ dev) - r

        def exact_y(x):
            y = self.y_star(x)
            return y, self.f(x)

        return ProblemOracles(
            dim_x=self.n,
            phi_value=phi_value,
            grad_x_phi=lambda x, y: A.T @ y,
            grad_y_phi=lambda x, y: A @ x + b - eta * y,
            psi_value=psi_value,
            grad_x_psi=lambda x, w: C.T @ w,
            grad_w_psi=lambda x, w: C @ x - c - strength * (w - center),
            set_Y=FeasibleSet.whole_space(self.m),
            set_W=FeasibleSet.simplex(self.l),
            smoothness=self.smoothness(),
            exact_inner_max_y=exact_y,
            exact_inner_max_w=self.w_star_and_g,
            initial_point=lambda seed: np.zeros(self.n),
            name="quadratic-testbed",
        )


@dataclass(frozen=True)
class KktPoint:
    x: np.ndarray
    lam: float
    f_value: float
    g_value: float
    residual: float
    grid_gap: float | None = None


def _batched_regularized_max(Z, reg):
    """Row-wise closed-form regularized simplex max, vectorized over a grid."""
    npts, l = Z.shape
    strength = reg * l
    V = 1.0 / l + Z / strength
    U = -np.sort(-V, axis=1)
    css = np.cumsum(U, axis=1) - 1.0
    idx = np.arange(1, l + 1)
    keep = U - css / idx > 0
    rho = l - 1 - np.argmax(keep[:, ::-1], axis=1)
    tau = css[np.arange(npts), rho] / (rho + 1.0)
    W = np.maximum(V - tau[:, None], 0.0)
    dev = W - 1.0 / l
    return np.sum(W * Z, axis=1) - 0.5 * strength * np.sum(dev * dev, axis=1)


def grid_scan_gap(tb: QuadraticTestbed, x_star, half_width: float = 1.0, points: int = 41) -> float:
    """``min f`` over feasible grid points around ``x_star`` minus ``f(x_star)``.

    A nonnegative result means no feasible grid point beats the candidate.
    """
    axes = [np.linspace(xi - half_width, xi + half_width, points) for xi in x_star]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, tb.n)
    g = _batched_regularized_max(mesh @ tb.C.T - tb.c, tb.reg) - tb.r
    Zf = mesh @ tb.A.T + tb.b
    f = np.sum(Zf * Zf, axis=1) / (2.0 * tb.eta)
    feasible = g <= 0.0
    if not np.any(feasible):
        return float("inf")
    return float(np.min(f[feasible]) - tb.f(x_star))


def solve_kkt(tb: QuadraticTestbed, starts=None, seed: int = 0, validate_grid: bool = True) -> KktPoint:
    """High-accuracy KKT point of ``min f(x) s.t. g(x) <= 0``.

    Multi-start SLSQP, then a Newton polish of the active KKT system
    ``grad f + lam grad g = 0, g = 0`` when the constraint binds.
    """
    rng = np.random.default_rng(seed)
    if starts is None:
        starts = [np.zeros(tb.n)] + [rng.standard_normal(tb.n) for _ in range(4)]
    cons = {"type": "ineq", "fun": lambda x: -tb.g(x), "jac": lambda x: -tb.grad_g(x)}
    best = None
    for x0 in starts:
        res = optimize.minimize(tb.f, x0, jac=tb.grad_f, constraints=[cons], method="SLSQP",
                                options={"ftol": 1e-15, "maxiter": 1000})
        if tb.g(res.x) <= 1e-8 and (best is None or tb.f(res.x) < tb.f(best)):
            best = res.x
    if best is None:
        raise ArithmeticError("no feasible KKT candidate found")
    x = best
    lam = 0.0
    if tb.g(x) > -1e-6:
        gg = tb.grad_g(x)
        lam = max(-float(gg @ tb.grad_f(x)) / float(gg @ gg), 0.0)

        def system(z):
            xx, ll = z[:-1], z[-1]
            return np.append(tb.grad_f(xx) + ll * tb.grad_g(xx), tb.g(xx))

        sol = optimize.root(system, np.append(x, lam), method="hybr", options={"xtol": 1e-14})
        cand_x, cand_l = sol.x[:-1], sol.x[-1]
        before = kkt_residuals(tb.oracles(), x, lam).worst
        after = kkt_residuals(tb.oracles(), cand_x, max(cand_l, 0.0)).worst
        if cand_l >= 0 and after <= before:
            x, lam = cand_x, float(cand_l)
    rep = kkt_residuals(tb.oracles(), x, lam)
    gap = grid_scan_gap(tb, x) if validate_grid and tb.n <= 3 else None
    return KktPoint(np.asarray(x, float), float(lam), rep.f_value, rep.g_value, rep.worst, gap)


def make_testbed(seed: int = 42, n: int = 3, m: int = 2, l: int = 3, eta: float = 1.0,
                 reg: float = 0.5, r: float = 0.0, max_retries: int = 50):
    """Random testbed whose constraint binds at the solution, plus its KKT point.

    The unconstrained minimizers of ``f`` contain a point ``x_u`` with
    ``||x_u|| = 2``; ``c`` is set so that ``g(0) < 0`` while ``x_u`` violates
    the constraint. Draws whose solution leaves the constraint slack are
    discarded and redrawn from the same generator, so the result is a
    deterministic function of the arguments.
    """
    if min(n, m, l) < 1:
        raise ValueError("dimensions must be at least 1")
    if r < 0:
        raise ValueError("r must be nonnegative so that the origin stays feasible")
    rng = np.random.default_rng(seed)
    for attempt in range(max_retries):
        A = rng.standard_normal((m, n))
        C = rng.standard_normal((l, n))
        x_u = rng.standard_normal(n)
        x_u *= 2.0 / np.linalg.norm(x_u)
        b = -A @ x_u
        s = C @ x_u
        c = 0.5 * np.abs(s) + 0.1
        tb = QuadraticTestbed(A, b, C, c, eta, reg, r)
        if tb.g(x_u) <= 0.0:
            continue
        kkt = solve_kkt(tb, seed=seed + attempt)
        if kkt.g_value > -1e-8 and kkt.lam > 1e-6:
            return tb, kkt
    raise ArithmeticError(f"no testbed with a binding constraint after {max_retries} draws")

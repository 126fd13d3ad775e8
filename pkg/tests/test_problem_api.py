import numpy as np
import pytest

from idbpd.metrics import implicit_value_and_grad
from idbpd.problem_api import (FeasibleSet, OracleError, ProblemOracles, Smoothness,
                               check_gradient, instrument, oracle_gradient_errors)


def toy_problem(bad_gradient=False):
    """phi = x @ y - ||y||^2 / 2 on R^2, psi = w @ x - 1 on the simplex."""
    return ProblemOracles(
        dim_x=2,
        phi_value=lambda x, y: float(x @ y) - 0.5 * float(y @ y),
        grad_x_phi=(lambda x, y: 2.0 * y) if bad_gradient else (lambda x, y: y.copy()),
        grad_y_phi=lambda x, y: x - y,
        psi_value=lambda x, w: float(w @ x) - 1.0,
        grad_x_psi=lambda x, w: w.copy(),
        grad_w_psi=lambda x, w: x.copy(),
        set_Y=FeasibleSet.whole_space(2),
        set_W=FeasibleSet.simplex(2),
        smoothness=Smoothness(L_xy_phi=1.0, L_yy_phi=1.0, concavity_y=1.0),
    )


def test_toy_value_at_unit_vector():
    p = toy_problem()
    x = np.array([1.0, 0.0])
    assert p.phi_value(x, np.array([1.0, 0.0])) == pytest.approx(0.5)
    f, grad, y = implicit_value_and_grad(p, x, "f", 200)
    assert f == pytest.approx(0.5, abs=1e-12)
    np.testing.assert_allclose(grad, x, atol=1e-12)


def test_gradient_checks_pass_and_catch_errors():
    rng = np.random.default_rng(0)
    x, y, w = rng.standard_normal(2), rng.standard_normal(2), np.array([0.3, 0.7])
    assert max(oracle_gradient_errors(toy_problem(), x, y, w).values()) < 1e-8
    assert oracle_gradient_errors(toy_problem(True), x, y, w)["grad_x_phi"] > 0.1


def test_check_gradient_validation():
    with pytest.raises(ValueError):
        check_gradient(lambda v: 0.0, lambda v: v, np.ones(2), step=0.0)
    with pytest.raises(ValueError):
        check_gradient(lambda v: 0.0, lambda v: np.ones(3), np.ones(2))


def test_instrument_counts_and_guards():
    p, counter = instrument(toy_problem())
    x = np.zeros(2)
    p.phi_value(x, x)
    p.grad_x_phi(x, x)
    p.grad_x_psi(x, np.array([0.5, 0.5]))
    counts = counter.as_dict()
    assert counts["phi_value"] == 1
    assert counts["primal_gradient_evals"] == 2
    assert counts["total"] == 3
    bad = ProblemOracles(**{**toy_problem().__dict__, "phi_value": lambda x, y: float("nan")})
    wrapped, _ = instrument(bad)
    with pytest.raises(OracleError):
        wrapped.phi_value(x, x)
    short = ProblemOracles(**{**toy_problem().__dict__, "grad_x_phi": lambda x, y: np.ones(3)})
    wrapped, _ = instrument(short)
    with pytest.raises(ValueError):
        wrapped.grad_x_phi(x, x)


def test_feasible_set_validation_and_centers():
    with pytest.raises(ValueError):
        FeasibleSet("cone", 2)
    with pytest.raises(ValueError):
        FeasibleSet.box([1.0], [0.0])
    with pytest.raises(ValueError):
        FeasibleSet.ball([0.0], 0.0)
    np.testing.assert_allclose(FeasibleSet.simplex(4).center_point(), 0.25)
    np.testing.assert_allclose(FeasibleSet.box([0, -np.inf], [2, 5]).center_point(), [1.0, 0.0])
    assert FeasibleSet.ball([1.0, 2.0], 1.0).to_dict()["radius"] == 1.0


def test_smoothness_constants():
    sm = Smoothness(L_xy_phi=2.0, L_yy_phi=1.0, concavity_y=0.5, L_xw_psi=1.0, L_ww_psi=1.0, concavity_w=1.0)
    assert sm.L_f == pytest.approx(9.0)
    assert sm.L_g == pytest.approx(2.0)
    assert sm.primal_lipschitz_sum == pytest.approx(11.0)
    assert Smoothness().L_f is None
    with pytest.raises(ValueError):
        Smoothness(concavity_y=0.0)
    with pytest.raises(ValueError):
        Smoothness(L_xx_phi=-1.0)


def test_shipped_problems_pass_gradient_checks(testbed42, small_dro):
    tb, _ = testbed42
    rng = np.random.default_rng(1)
    for prob in (tb.oracles(), small_dro):
        for _ in range(10):
            x = rng.standard_normal(prob.dim_x) * 0.5
            y = rng.dirichlet(np.ones(prob.dim_y)) if prob.set_Y.kind == "simplex" else rng.standard_normal(prob.dim_y)
            w = rng.dirichlet(np.ones(prob.dim_w))
            assert max(oracle_gradient_errors(prob, x, y, w).values()) < 1e-4


def test_phi_at_exact_maximizer_equals_f(testbed42, small_dro):
    tb, _ = testbed42
    rng = np.random.default_rng(2)
    for prob in (tb.oracles(), small_dro):
        for _ in range(5):
            x = rng.standard_normal(prob.dim_x) * 0.5
            y, f = prob.exact_inner_max_y(x)
            w, g = prob.exact_inner_max_w(x)
            assert prob.phi_value(x, y) == pytest.approx(f, abs=1e-10)
            assert prob.psi_value(x, w) == pytest.approx(g, abs=1e-10)

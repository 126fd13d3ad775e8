import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from idbpd.problem_api import FeasibleSet
from idbpd.projections import (closed_form_regularized_simplex_max, estimate_ascent_stepsize,
                               inner_maximize, project_set, project_simplex)


def face_enumeration_projection(v):
    """Exact simplex projection by trying every support set."""
    v = np.asarray(v, float)
    n = v.shape[0]
    best, best_dist = None, math.inf
    for size in range(1, n + 1):
        for support in itertools.combinations(range(n), size):
            idx = list(support)
            u = np.zeros(n)
            u[idx] = v[idx] - (v[idx].sum() - 1.0) / size
            if np.any(u < -1e-15):
                continue
            dist = float(np.sum((u - v) ** 2))
            if dist < best_dist:
                best, best_dist = u, dist
    return best


def grid_projection(v, resolution=400):
    """Nearest simplex point over a regular barycentric grid (2 or 3 dims)."""
    v = np.asarray(v, float)
    ticks = np.arange(resolution + 1) / resolution
    if v.shape[0] == 2:
        pts = np.stack([ticks, 1.0 - ticks], axis=1)
    else:
        a, b = np.meshgrid(ticks, ticks, indexing="ij")
        a, b = a.ravel(), b.ravel()
        keep = a + b <= 1.0 + 1e-12
        pts = np.stack([a[keep], b[keep], 1.0 - a[keep] - b[keep]], axis=1)
    return pts[np.argmin(np.sum((pts - v) ** 2, axis=1))]


def test_projection_of_point_outside():
    np.testing.assert_allclose(project_simplex([2.0, 0.0]), [1.0, 0.0], atol=1e-15)


def test_projection_fixes_simplex_points():
    u = np.array([0.2, 0.3, 0.5])
    np.testing.assert_allclose(project_simplex(u), u, atol=1e-15)


@pytest.mark.parametrize("dim", [2, 3])
def test_projection_matches_brute_force(dim):
    rng = np.random.default_rng(dim)
    for _ in range(100):
        v = 2.0 * rng.standard_normal(dim)
        got = project_simplex(v)
        np.testing.assert_allclose(got, face_enumeration_projection(v), atol=1e-10)
        # the grid minimizer is within one cell of the exact projection
        assert np.max(np.abs(got - grid_projection(v))) <= 2.0 / 400


@settings(max_examples=200, deadline=None)
@given(arrays(np.float64, st.integers(1, 12), elements=st.floats(-50, 50)))
def test_projection_lands_on_simplex_and_is_idempotent(v):
    u = project_simplex(v)
    assert np.all(u >= 0)
    assert abs(u.sum() - 1.0) <= 1e-12
    np.testing.assert_allclose(project_simplex(u), u, atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.integers(1, 6), elements=st.floats(-10, 10)))
def test_projection_variational_inequality(v):
    u = project_simplex(v)
    rng = np.random.default_rng(0)
    for z in rng.dirichlet(np.ones(v.shape[0]), size=20):
        assert (v - u) @ (z - u) <= 1e-9


def test_projection_rejects_bad_input():
    with pytest.raises(ValueError):
        project_simplex([])
    with pytest.raises(ValueError):
        project_simplex([np.nan, 1.0])


def test_project_set_kinds():
    np.testing.assert_allclose(project_set([3.0, -4.0], FeasibleSet.whole_space(2)), [3.0, -4.0])
    np.testing.assert_allclose(project_set([3.0, -4.0], FeasibleSet.box([-1, -1], [1, 1])), [1.0, -1.0])
    np.testing.assert_allclose(project_set([3.0, 4.0], FeasibleSet.ball([0, 0], 1.0)), [0.6, 0.8])
    np.testing.assert_allclose(project_set([0.1, 0.2], FeasibleSet.ball([0, 0], 1.0)), [0.1, 0.2])
    with pytest.raises(ValueError):
        project_set([1.0, 2.0, 3.0], FeasibleSet.simplex(2))


def test_closed_form_two_point_example():
    u, value = closed_form_regularized_simplex_max([1.0, 0.0], 1.0)
    np.testing.assert_allclose(u, [0.75, 0.25], atol=1e-15)
    assert value == pytest.approx(0.625, abs=1e-15)


def test_closed_form_rejects_nonpositive_reg():
    with pytest.raises(ValueError):
        closed_form_regularized_simplex_max([1.0, 2.0], 0.0)


def _regularized(loss, reg):
    m = loss.shape[0]
    s = reg * m

    def h(u):
        return float(u @ loss) - 0.5 * s * float((u - 1.0 / m) @ (u - 1.0 / m))

    def hg(u):
        return loss - s * (u - 1.0 / m)

    return h, hg, s


def test_closed_form_agrees_with_inner_ascent():
    rng = np.random.default_rng(7)
    for _ in range(50):
        m = int(rng.integers(2, 8))
        loss = rng.exponential(size=m)
        reg = float(rng.uniform(0.05, 2.0))
        h, hg, s = _regularized(loss, reg)
        k = int(rng.integers(0, 100))
        steps = 10 * math.ceil(math.log(k + 2))
        res = inner_maximize(h, hg, FeasibleSet.simplex(m), np.full(m, 1.0 / m), steps, 1.0 / s)
        u, val = closed_form_regularized_simplex_max(loss, reg)
        np.testing.assert_allclose(res.maximizer, u, atol=1e-5)
        assert res.value == pytest.approx(val, abs=1e-5)


def test_ascent_linear_rate_on_strongly_concave_quadratic():
    # h(u) = -(mu/2)||u - c||^2 over a box: distance contracts by (1 - s mu)
    mu, L = 1.0, 1.0
    c = np.array([0.3, -0.2, 0.9])
    box = FeasibleSet.box([-1, -1, -1], [1, 1, 1])
    h = lambda u: -0.5 * mu * float((u - c) @ (u - c))  # noqa: E731
    hg = lambda u: -mu * (u - c)  # noqa: E731
    s = 0.2 / L
    res = inner_maximize(h, hg, box, np.array([-1.0, 1.0, -1.0]), 40, s, record=True)
    gaps = -res.value_trajectory[:30]
    slope = np.polyfit(np.arange(30), np.log(gaps), 1)[0]
    assert slope <= math.log(1.0 - s * mu) + 0.05


def test_plain_ascent_is_monotone():
    rng = np.random.default_rng(3)
    loss = rng.exponential(size=6)
    h, hg, s = _regularized(loss, 0.3)
    res = inner_maximize(h, hg, FeasibleSet.simplex(6), rng.dirichlet(np.ones(6)), 30, 0.5 / s,
                         record=True)
    assert np.all(np.diff(res.value_trajectory) >= -1e-12)


def test_inner_maximize_validates_arguments():
    h, hg, _ = _regularized(np.ones(3), 1.0)
    with pytest.raises(ValueError):
        inner_maximize(h, hg, FeasibleSet.simplex(3), np.ones(3) / 3, 0, 0.1)
    with pytest.raises(ValueError):
        inner_maximize(h, hg, FeasibleSet.simplex(3), np.ones(3) / 3, 1, 0.0)


def test_line_search_stepsize_is_sufficient():
    h, hg, s = _regularized(np.array([1.0, 0.0, 2.0]), 0.4)
    step = estimate_ascent_stepsize(h, hg, FeasibleSet.simplex(3), np.ones(3) / 3)
    # any accepted step of the quadratic is at most 1/L up to the doubling factor
    assert 0 < step <= 2.0 / s

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from saif.cm import CmWorkspace, cm_epochs
from saif.datasets import gen_synthetic_regression
from saif.dual import (Ball, dual_point, gap_ball, gap_radius, intersect_balls, lambda_max,
                       scaled_tau, sequential_ball)
from saif.exceptions import ParameterError, PreconditionError
from saif.losses import Problem, dual_objective


def sample_in_ball(rng, ball, m):
    d = ball.center.size
    u = rng.standard_normal((m, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return ball.center + u * (ball.radius * rng.uniform(size=(m, 1)) ** (1.0 / d))


def test_ball_rejects_bad_input():
    with pytest.raises(ParameterError):
        Ball(np.zeros(2), -1.0)
    with pytest.raises(ParameterError):
        Ball(np.array([np.nan, 0.0]), 1.0)


def test_ball_screen_examples():
    b = Ball(np.zeros(1), 0.4)
    assert b.screen(np.array([0.5]), np.array([1.0]))[0]
    b = Ball(np.zeros(1), 0.6)
    assert not b.screen(np.array([0.5]), np.array([1.0]))[0]


def test_dual_point_tau_examples():
    X = np.array([[1.0], [0.0]])
    # theta_hat = -f'(0)/lam = y/lam, x^T theta_hat = 2
    pr = Problem(X, np.array([2.0, 0.0]), lam=1.0)
    theta, tau = dual_point(np.zeros(2), pr, [0])
    assert tau == 0.5
    np.testing.assert_allclose(theta, [1.0, 0.0])
    pr = Problem(X, np.array([0.7, 0.0]), lam=1.0)
    theta, tau = dual_point(np.zeros(2), pr, [0])
    assert tau == 1.0
    np.testing.assert_allclose(theta, [0.7, 0.0])


def test_dual_point_needs_columns():
    pr = Problem(np.eye(2), np.ones(2))
    with pytest.raises(PreconditionError):
        dual_point(np.zeros(2), pr, [])


def test_dual_point_zero_gradient():
    pr = Problem(np.eye(2), np.ones(2))
    theta, _ = dual_point(np.ones(2), pr, [0, 1])
    assert not np.any(theta)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 10_000), refine=st.booleans(), logistic=st.booleans())
def test_dual_point_feasible(seed, refine, logistic):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((7, 12))
    y = np.sign(rng.standard_normal(7)) if logistic else rng.standard_normal(7)
    pr = Problem(X, y, "logistic" if logistic else "squared", lam=float(rng.uniform(0.01, 2.0)))
    cols = rng.choice(12, size=int(rng.integers(1, 13)), replace=False)
    theta, _ = dual_point(rng.standard_normal(7), pr, cols)
    assert np.max(np.abs(X[:, cols].T @ theta)) <= 1 + 1e-12
    assert np.isfinite(dual_objective(pr, theta))


def test_refined_tau_improves_dual():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((10, 20))
    pr = Problem(X, rng.standard_normal(10), lam=0.5)
    z = X @ (0.1 * rng.standard_normal(20))
    plain, _ = dual_point(z, pr, np.arange(20))
    refined, _ = dual_point(z, pr, np.arange(20), refine=True)
    assert dual_objective(pr, refined) >= dual_objective(pr, plain)


def test_scaled_tau_clamp_cases():
    th = np.array([1.0, 0.0])
    # y^T th / (lam |th|^2) = 0.3 inside [-0.5, 0.5]
    assert scaled_tau(th, 2.0, np.array([0.3, 0.0]), 1.0) == pytest.approx(0.3)
    assert scaled_tau(th, 2.0, np.array([5.0, 0.0]), 1.0) == pytest.approx(0.5)
    assert scaled_tau(np.zeros(2), 2.0, np.ones(2), 1.0) == 0.0


def test_gap_radius_examples():
    pr = Problem(np.eye(2), np.ones(2), lam=1.0)
    assert gap_radius(0.5, pr) == 1.0
    assert gap_radius(0.0, pr) == 0.0
    prl = Problem(np.eye(2), np.ones(2), "logistic", lam=2.0)
    assert gap_radius(2.0, prl) == pytest.approx(math.sqrt(2 * 0.25 * 2.0) / 2.0)


def test_gap_ball_rejects_infeasible_theta():
    pr = Problem(np.eye(2), np.ones(2), lam=1.0)
    with pytest.raises(PreconditionError):
        gap_ball(pr, np.zeros(2), np.array([2.0, 0.0]))


@pytest.mark.parametrize("loss", ["squared", "logistic"])
@pytest.mark.parametrize("seed", range(4))
def test_gap_ball_contains_optimum(loss, seed):
    rng = np.random.default_rng(100 + seed)
    X = rng.standard_normal((12, 25))
    y = rng.standard_normal(12)
    if loss == "logistic":
        y = np.sign(y)
    lam = 0.3 * oracles.lambda_max(X, y, loss)
    theta_star, _, _ = oracles.dual_optimum(X, y, lam, loss)
    pr = Problem(X, y, loss, lam)
    ws = CmWorkspace.zeros(pr, np.arange(25))
    cm_epochs(ws, pr, 3)
    theta, _ = dual_point(ws.linear_predictor, pr, np.arange(25))
    ball = gap_ball(pr, ws.beta, theta)
    assert np.linalg.norm(theta_star - ball.center) <= ball.radius + 1e-10


def test_gap_ball_radius_monotone_under_more_epochs():
    rng = np.random.default_rng(8)
    X = rng.standard_normal((15, 30))
    y = rng.standard_normal(15)
    pr = Problem(X, y, lam=0.2 * oracles.lambda_max(X, y))
    ws = CmWorkspace.zeros(pr, np.arange(30))
    best_dual, last = -np.inf, np.inf
    for _ in range(30):
        cm_epochs(ws, pr, 1)
        theta, _ = dual_point(ws.linear_predictor, pr, np.arange(30), refine=True)
        # keep the best feasible dual point, as the solvers do
        d = dual_objective(pr, theta)
        if d > best_dual:
            best_dual, best_theta = d, theta
        r = gap_ball(pr, ws.beta, best_theta).radius
        assert r <= last + 1e-12
        last = r


def test_sequential_ball_equal_lambdas():
    pr = Problem(np.eye(2), np.ones(2), lam=1.0)
    b = sequential_ball(np.array([0.5, 0.5]), 1.0, 1.0, pr)
    assert b.radius == 0.0
    np.testing.assert_array_equal(b.center, [0.5, 0.5])


def test_sequential_ball_rejects_larger_lambda():
    pr = Problem(np.eye(2), np.ones(2), lam=2.0)
    with pytest.raises(ParameterError):
        sequential_ball(np.zeros(2), 1.0, 2.0, pr)


@pytest.mark.parametrize("seed", range(4))
def test_sequential_ball_from_lambda_max(seed):
    rng = np.random.default_rng(200 + seed)
    X = rng.standard_normal((10, 30))
    y = rng.standard_normal(10)
    lmax = oracles.lambda_max(X, y)
    lam = 0.5 * lmax
    theta_star, _, _ = oracles.dual_optimum(X, y, lam)
    pr = Problem(X, y, lam=lam)
    ball = sequential_ball(y / lmax, lmax, lam, pr)
    assert np.linalg.norm(theta_star - ball.center) <= ball.radius + 1e-10


@pytest.mark.parametrize("loss", ["squared", "logistic"])
@pytest.mark.parametrize("seed", range(3))
def test_sequential_ball_refinement(loss, seed):
    rng = np.random.default_rng(300 + seed)
    X = rng.standard_normal((10, 30))
    y = rng.standard_normal(10)
    if loss == "logistic":
        y = np.sign(y)
    lam0 = 0.6 * oracles.lambda_max(X, y, loss)
    lam = 0.4 * oracles.lambda_max(X, y, loss)
    th0, _, _ = oracles.dual_optimum(X, y, lam0, loss)
    theta_star, _, _ = oracles.dual_optimum(X, y, lam, loss)
    pr = Problem(X, y, loss, lam)
    plain = sequential_ball(th0, lam0, lam, pr)
    # a feasible point: the scaled gradient at zero
    feas, _ = dual_point(np.zeros(10), pr, np.arange(30))
    refined = sequential_ball(th0, lam0, lam, pr, feasible_theta=feas)
    assert refined.radius <= plain.radius + 1e-12
    for b in (plain, refined):
        assert np.linalg.norm(theta_star - b.center) <= b.radius + 1e-10


def test_intersect_unit_spheres():
    b = intersect_balls(Ball(np.zeros(2), 1.0), Ball(np.array([1.0, 0.0]), 1.0))
    assert b.radius == pytest.approx(math.sqrt(3) / 2)
    np.testing.assert_allclose(b.center, [0.5, 0.0])


def test_intersect_containment_returns_smaller():
    b2 = Ball(np.zeros(3), 1.0)
    out = intersect_balls(Ball(np.zeros(3), 2.0), b2)
    assert out is b2


def test_intersect_disjoint_flags_near_empty():
    out = intersect_balls(Ball(np.zeros(2), 1.0), Ball(np.array([3.0, 0.0]), 0.5))
    assert out.near_empty
    assert out.radius == 0.5


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_intersection_soundness(seed):
    rng = np.random.default_rng(seed)
    b1 = Ball(rng.standard_normal(5), float(rng.uniform(0.2, 2.0)))
    b2 = Ball(b1.center + rng.standard_normal(5) * rng.uniform(0.1, 1.5), float(rng.uniform(0.2, 2.0)))
    out = intersect_balls(b1, b2)
    assert out.radius <= min(b1.radius, b2.radius)
    small = b1 if b1.radius <= b2.radius else b2
    pts = sample_in_ball(rng, small, 4000)
    inside = pts[(np.linalg.norm(pts - b1.center, axis=1) <= b1.radius)
                 & (np.linalg.norm(pts - b2.center, axis=1) <= b2.radius)]
    assert np.all(np.linalg.norm(inside - out.center, axis=1) <= out.radius + 1e-12)


def test_obtuse_lens_is_covered():
    # chord plane beyond the small ball's centre
    b1 = Ball(np.zeros(2), 2.0)
    b2 = Ball(np.array([1.8, 0.0]), 0.5)
    out = intersect_balls(b1, b2)
    rng = np.random.default_rng(0)
    pts = sample_in_ball(rng, b2, 5000)
    pts = pts[np.linalg.norm(pts, axis=1) <= 2.0]
    assert np.all(np.linalg.norm(pts - out.center, axis=1) <= out.radius + 1e-12)


def test_lambda_max_examples():
    X = np.array([[1.0, 2.0], [0.0, 1.0]])
    y = np.array([1.0, 1.0])
    assert lambda_max(Problem(X, y)) == 3.0
    assert lambda_max(Problem(X, y, "logistic")) == 1.5


def test_lambda_max_frozen_instances():
    # independent oracle values on fixed instances
    rng = np.random.default_rng(11)
    X = rng.standard_normal((20, 100))
    y = X[:, :5] @ np.array([1, -2, 1.5, 0.5, -1]) + 0.1 * rng.standard_normal(20)
    assert lambda_max(Problem(X, y)) == pytest.approx(36.18740239150578, rel=1e-12)
    rng = np.random.default_rng(12)
    X = rng.standard_normal((40, 150))
    y = np.sign(X[:, :5] @ np.ones(5) + 0.3 * rng.standard_normal(40))
    assert lambda_max(Problem(X, y, "logistic")) == pytest.approx(10.792932285845282, rel=1e-12)


def test_lambda_max_order_of_magnitude_on_benchmark_generator():
    # the reference instance reports 2.183e4; ours is seed dependent
    ds, _ = gen_synthetic_regression(100, 5000, 0.2, seed=0)
    lm = lambda_max(Problem(ds.X, ds.y))
    assert 5e3 <= lm <= 1e5

"""Feasible dual points and ball regions certified to contain a dual optimum.

Every screening decision in this package is a ball test: if the optimal
dual point lies in ``B(c, r)`` then ``|x_i^T c| + ||x_i|| r < 1`` proves that
feature ``i`` has a zero coefficient at the optimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .exceptions import ConsistencyError, ParameterError, PreconditionError
from .losses import (GAP_SLACK, Loss, Problem, conjugate, conjugate_grad, dual_objective,
                     duality_gap, gap_uncertainty, loss_grad, primal_objective)

FEASIBILITY_SLACK = 1e-10
GOLDEN_TOL = 1e-10


@dataclass
class Ball:
    center: np.ndarray
    radius: float
    near_empty: bool = False

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if not self.radius >= 0:
            raise ParameterError(f"ball radius must be nonnegative, got {self.radius!r}")
        if not np.all(np.isfinite(self.center)):
            raise ParameterError("ball center is not finite")
        self.radius = float(self.radius)

    def contains(self, point, slack=0.0) -> bool:
        return float(np.linalg.norm(np.asarray(point) - self.center)) <= self.radius + slack

    def screen(self, corr, norms) -> np.ndarray:
        """Boolean mask of features certified inactive, given ``corr = X^T center``."""
        return np.abs(corr) + norms * self.radius < 1.0


def _scaled_dual(problem: Problem, z, columns, refine):
    """Return ``(theta, tau, corr)`` with ``corr = X[:, columns]^T theta``."""
    theta_hat = -loss_grad(z, problem.y, problem.loss) / problem.lam
    corr = problem.X.tdot(theta_hat, columns)
    m = float(np.max(np.abs(corr))) if corr.size else 0.0
    if not np.any(theta_hat):
        return np.zeros_like(theta_hat), 1.0, np.zeros_like(corr)
    if refine and problem.loss is Loss.SQUARED:
        tau = scaled_tau(theta_hat, m, problem.y, problem.lam)
    else:
        tau = 1.0 / m if m > 1.0 else 1.0
    return tau * theta_hat, tau, tau * corr


def scaled_tau(theta_hat, max_corr, y, lam) -> float:
    """Squared-loss optimal scaling of ``theta_hat`` inside the feasible box.

    ``tau = clip(y^T theta / (lam ||theta||^2), -1/m, 1/m)`` with
    ``m = max_i |x_i^T theta|``.
    """
    nsq = float(theta_hat @ theta_hat)
    if nsq == 0.0:
        return 0.0
    tau = float(y @ theta_hat) / (lam * nsq)
    if max_corr > 0.0:
        bound = 1.0 / max_corr
        tau = min(max(tau, -bound), bound)
    return tau


def dual_point(beta_predictor, problem: Problem, constraint_columns, refine: bool = False):
    """Feasible dual point from a primal linear predictor.

    ``theta_hat = -f'(X beta) / lam`` is rescaled by ``tau`` so that
    ``|x_i^T theta| <= 1`` over ``constraint_columns``. With ``refine`` (squared
    loss only) ``tau`` is the closest-to-optimal feasible scaling instead of
    the plain ``1 / max |x_i^T theta_hat|``.

    Returns
    -------
    theta : ndarray of shape (n,)
    tau : float
    """
    columns = np.asarray(constraint_columns, dtype=np.intp)
    if columns.size == 0:
        raise PreconditionError("dual_point needs at least one constraint column")
    theta, tau, _ = _scaled_dual(problem, np.asarray(beta_predictor, dtype=float), columns, refine)
    return theta, tau


def gap_radius(gap: float, problem: Problem, floor: float = 0.0) -> float:
    """``sqrt(2 alpha gap) / lam`` with ``gap`` raised to at least ``floor``.

    Pass the rounding uncertainty of the gap as ``floor``: a gap that
    rounds to zero must not make the ball a point, or features sitting
    exactly on the constraint boundary can fail the screen by one ulp.
    """
    return math.sqrt(2.0 * problem.loss.alpha * max(gap, floor, 0.0)) / problem.lam


def gap_ball(problem: Problem, beta, theta, restricted_set=None, offset_coef: float = 0.0) -> Ball:
    """Ball ``B(theta, sqrt(2 alpha gap) / lam)`` around a feasible dual point.

    ``gap`` is the duality gap of the problem restricted to
    ``restricted_set`` (all features by default); ``beta`` is a full-length
    vector that is treated as zero outside that set.
    """
    theta = np.asarray(theta, dtype=float)
    cols = np.arange(problem.p) if restricted_set is None else np.asarray(restricted_set, dtype=np.intp)
    if cols.size:
        corr = problem.X.tdot(theta, cols)
        if np.max(np.abs(corr)) > 1.0 + FEASIBILITY_SLACK:
            raise PreconditionError("theta is not dual feasible on the restricted set")
    beta = np.asarray(beta, dtype=float)
    primal = primal_objective(problem, beta[cols], cols, offset_coef)
    dual = dual_objective(problem, theta)
    gap = duality_gap(primal, dual)
    return Ball(theta, gap_radius(gap, problem, gap_uncertainty(primal, dual)))


def _seq_bracket(problem: Problem, theta0, lam0, first_term):
    lam = problem.lam
    y, loss = problem.y, problem.loss
    v0 = -lam0 * theta0
    return (first_term
            - float(np.sum(conjugate(v0, y, loss)))
            + (lam - lam0) * float(conjugate_grad(v0, y, loss) @ theta0))


def _golden_min(fun, lo=0.0, hi=1.0, tol=GOLDEN_TOL):
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = fun(c), fun(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = fun(d)
    x = 0.5 * (a + b)
    # endpoints are admissible and often optimal
    return min((fun(lo), lo), (fun(hi), hi), (fun(x), x))[1]


def sequential_ball(theta0_star, lambda0, lambda_, problem: Problem, feasible_theta=None) -> Ball:
    """Ball around ``(lambda0 / lambda) theta0_star`` from a solution at a larger penalty.

    ``theta0_star`` must be dual optimal at ``lambda0 > lambda_``. When a
    point ``feasible_theta`` of the dual feasible region is supplied, the
    first conjugate term is replaced by its minimum along the segment from
    ``feasible_theta`` to ``(lambda_ / lambda0) theta0_star``, which can only
    shrink the radius.
    """
    lam, lam0 = float(lambda_), float(lambda0)
    if not 0 < lam <= lam0:
        raise ParameterError(f"need 0 < lambda <= lambda0, got lambda={lam!r}, lambda0={lam0!r}")
    theta0 = np.asarray(theta0_star, dtype=float)
    center = (lam0 / lam) * theta0
    if lam == lam0:
        return Ball(center, 0.0)
    if problem.lam != lam:
        problem = problem.with_lam(lam)
    y, loss = problem.y, problem.loss
    anchor = (lam / lam0) * theta0

    def first(theta_bar):
        return float(np.sum(conjugate(-lam * theta_bar, y, loss)))

    if feasible_theta is None:
        term = first(anchor)
    else:
        th = np.asarray(feasible_theta, dtype=float)
        d = anchor - th
        dd = float(d @ d)
        if dd == 0.0:
            rho = 1.0
        elif loss is Loss.SQUARED:
            # f*(-lam t) = lam^2 |t|^2 / 2 - lam y^T t is quadratic along the segment
            rho = (float(y @ d) / lam - float(th @ d)) / dd
            rho = min(max(rho, 0.0), 1.0)
        else:
            rho = _golden_min(lambda r: first(th + r * d))
        term = min(first(th + rho * d), first(anchor))
    bracket = _seq_bracket(problem, theta0, lam0, term)
    rad2 = 2.0 * loss.alpha / (lam * lam) * bracket
    if rad2 < 0.0:
        scale = 2.0 * loss.alpha / (lam * lam) * max(1.0, abs(term))
        if rad2 < -GAP_SLACK * scale:
            raise ConsistencyError(f"negative sequential-ball radicand {rad2!r}")
        rad2 = 0.0
    return Ball(center, math.sqrt(rad2))


def intersect_balls(b1: Ball, b2: Ball) -> Ball:
    """Smallest-radius ball covering ``b1 ∩ b2`` built from the chord circle.

    In the proper-intersection regime the chord circle of the two spheres
    has radius ``2A/d`` (Heron's formula on the triangle with sides
    ``r1, r2, d``) and its center sits on the segment between the centers.
    Otherwise, or when the result would not be tighter, the smaller input
    ball is returned.
    """
    r1, r2 = b1.radius, b2.radius
    smaller = b1 if r1 <= r2 else b2
    d = float(np.linalg.norm(b1.center - b2.center))
    if d <= abs(r1 - r2):
        return smaller
    if d >= r1 + r2:
        return Ball(smaller.center, smaller.radius, near_empty=True)
    s = 0.5 * (r1 + r2 + d)
    area2 = s * (s - r1) * (s - r2) * (s - d)
    r = 2.0 * math.sqrt(max(area2, 0.0)) / d
    # signed distance from center 1 to the chord plane; outside [0, d] the
    # lens holds more than half of the smaller ball and the chord ball misses it
    d1 = (d * d + r1 * r1 - r2 * r2) / (2.0 * d)
    if not 0.0 <= d1 <= d or not r < min(r1, r2):
        return smaller
    center = (1.0 - d1 / d) * b1.center + (d1 / d) * b2.center
    return Ball(center, r)


def lambda_max(problem: Problem) -> float:
    """Smallest penalty at which the all-zero coefficient vector is optimal.

    ``max_i |x_i^T f'(z0)|`` with ``z0`` the predictor of the (optimized)
    unpenalized offset, or zero when there is none.
    """
    scores = problem.null_scores()
    return float(scores.max()) if scores.size else 0.0

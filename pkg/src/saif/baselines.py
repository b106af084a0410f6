"""Safe reference solvers: plain coordinate minimization, dynamic gap
screening, and a lambda-path driver with warm starts."""
from __future__ import annotations

import time

import numpy as np

from . import engine
from .cm import CmWorkspace, cm_epochs, unpenalized_coordinate_update
from .dual import Ball, _scaled_dual, gap_radius, sequential_ball
from .engine import SaifConfig
from .exceptions import ConvergenceError, ParameterError
from .losses import Problem, dual_objective, duality_gap, gap_uncertainty, loss_grad
from .results import Counters, SolveResult, Trace

PATH_METHODS = ("saif", "dynamic", "plain", "sequential")


def _start(problem: Problem, beta0):
    if beta0 is not None and np.any(beta0):
        return CmWorkspace.from_beta(problem, beta0)
    return CmWorkspace.zeros(problem)


def _zero_solution(problem: Problem, method: str, trace: Trace) -> SolveResult | None:
    """The trivial solution when ``lam >= lam_max``, else ``None``."""
    lam_max = float(problem.null_scores().max())
    if problem.lam < lam_max:
        return None
    state = engine.init_active_set(problem, SaifConfig())
    return engine.solved_at_zero(problem, state, method, trace)


def _result(problem, ws, counters, trace, method, primal, dual, gap, theta, radius,
            certificate, active) -> SolveResult:
    counters.base_ops = ws.base_op_count
    counters.epochs = ws.epochs
    return SolveResult(beta=ws.beta.copy(), gap=gap, certificate=certificate, primal=primal,
                       dual=dual, theta=theta, radius=radius, lam=problem.lam, method=method,
                       active=np.asarray(active, dtype=np.intp), offset_coef=ws.offset_coef,
                       counters=counters, trace=trace,
                       time_s=trace.records[-1].t_s if trace.records else 0.0)


def _screening_cm(problem: Problem, cfg: SaifConfig, beta0, method: str, screen: bool,
                  columns=None) -> SolveResult:
    """Coordinate minimization over ``columns`` with optional gap-ball screening.

    The dual point is normalized over ``columns`` (all features by default),
    so its gap is the gap of the problem restricted to those columns.
    """
    cfg = cfg.validate()
    trace = Trace()
    zero = _zero_solution(problem, method, trace)
    if zero is not None:
        return zero
    X = problem.X
    columns = np.arange(problem.p) if columns is None else np.asarray(columns, dtype=np.intp)
    ws = _start(problem, beta0)
    alive = columns.copy()
    ws.active = alive
    counters = Counters(peak_active=alive.size)
    best = None
    primal = dual = gap = np.inf
    theta, r = np.zeros(problem.n), np.inf
    for it in range(1, int(cfg.max_outer) + 1):
        counters.outer_iter = it
        cm_epochs(ws, problem, cfg.epochs_for(alive.size, columns.size))
        if problem.offset is not None:
            unpenalized_coordinate_update(ws, problem)
        theta, _, corr = _scaled_dual(problem, ws.linear_predictor, columns, cfg.refine_dual)
        counters.screen_ops += columns.size
        dual = dual_objective(problem, theta)
        if best is not None and best[0] > dual:
            dual, theta, corr = best
        else:
            best = (dual, theta, corr)
        primal = ws.objective(problem)
        gap = duality_gap(primal, dual)
        r = gap_radius(gap, problem, gap_uncertainty(primal, dual))
        trace.log("EPOCH", it, alive.size, gap, dual)
        if gap < cfg.epsilon:
            return _result(problem, ws, counters, trace, method, primal, dual, gap, theta, r,
                           True, alive)
        if screen:
            pos = np.searchsorted(columns, alive)
            drop = np.abs(corr[pos]) + X.norms[alive] * r < 1.0
            if np.any(drop):
                for j in alive[drop]:
                    ws.set_coef(problem, j, 0.0)
                alive = alive[~drop]
                ws.active = alive
                counters.n_deleted += int(drop.sum())
                trace.log("DEL", it, alive.size, gap, dual)
    result = _result(problem, ws, counters, trace, method, primal, dual, gap, theta, r, False, alive)
    raise ConvergenceError(f"{method} did not reach gap {cfg.epsilon} in {cfg.max_outer} iterations",
                           result)


def solve_plain(problem: Problem, config: SaifConfig | None = None, beta0=None) -> SolveResult:
    """Cyclic coordinate minimization over every feature, no screening."""
    return _screening_cm(problem, config or SaifConfig(), beta0, "plain", screen=False)


def solve_dynamic(problem: Problem, config: SaifConfig | None = None, beta0=None) -> SolveResult:
    """Coordinate minimization with dynamic gap-ball screening.

    Every ``inner_k`` passes the dual point is rescaled over the full feature
    set and features with ``|x_i^T theta| + ||x_i|| r < 1`` are removed for
    good.
    """
    return _screening_cm(problem, config or SaifConfig(), beta0, "dynamic", screen=True)


def _solve_sequential(problem: Problem, cfg: SaifConfig, beta0, prev) -> SolveResult:
    """Pre-screen with a sequential ball from the previous penalty, then plain CM on survivors.

    ``prev`` is ``(lam0, theta0)``. The previous dual point is only
    approximately optimal, so the pre-screen is not safe in general; the
    returned certificate re-checks the discarded features with the final
    gap ball.
    """
    lam0, theta0 = prev
    X = problem.X
    if problem.lam >= float(problem.null_scores().max()):
        return _zero_solution(problem, "sequential", Trace())
    ball = sequential_ball(theta0, lam0, problem.lam, problem)
    corr = X.tdot(ball.center)
    keep = np.flatnonzero(~ball.screen(corr, X.norms))
    if keep.size == 0:
        keep = np.array([int(np.argmax(problem.null_scores()))])
    if beta0 is not None:
        beta0 = np.where(np.isin(np.arange(problem.p), keep), beta0, 0.0)
    result = _screening_cm(problem, cfg, beta0, "sequential", screen=False, columns=keep)
    result.counters.screen_ops += problem.p
    dropped = np.setdiff1d(np.arange(problem.p), keep, assume_unique=True)
    check = X.tdot(result.theta, dropped)
    result.counters.screen_ops += dropped.size
    result.certificate = bool(np.all(Ball(result.theta, result.radius).screen(check, X.norms[dropped])))
    result.info["prescreened"] = int(dropped.size)
    return result


def solve_path(problem_template: Problem, lambdas, method: str = "saif",
               config: SaifConfig | None = None) -> list[SolveResult]:
    """Solve along a strictly decreasing sequence of penalties with warm starts.

    Each result carries ``cum_time_s``, the wall-clock time since the start
    of the path.
    """
    if method not in PATH_METHODS:
        raise ParameterError(f"method must be one of {PATH_METHODS}, got {method!r}")
    lambdas = np.asarray(lambdas, dtype=float).ravel()
    if lambdas.size == 0:
        raise ParameterError("empty lambda sequence")
    if np.any(lambdas <= 0):
        raise ParameterError("penalties must be positive")
    if np.any(np.diff(lambdas) >= 0):
        raise ParameterError("penalties must be strictly decreasing")
    cfg = (config or SaifConfig()).validate()
    solver = {"saif": engine.solve, "dynamic": solve_dynamic, "plain": solve_plain}.get(method)
    lam_max = float(problem_template.null_scores().max())
    t0 = time.perf_counter()
    results = []
    beta = None
    prev = None
    for lam in lambdas:
        problem = problem_template.with_lam(float(lam))
        if method == "sequential":
            if prev is None:
                z0 = problem.null_predictor()
                lam0 = max(lam_max, float(lam))
                prev = (lam0, -loss_grad(z0, problem.y, problem.loss) / lam0)
            res = _solve_sequential(problem, cfg, beta, prev)
            prev = (float(lam), res.theta)
        else:
            res = solver(problem, cfg, beta0=beta)
        res.cum_time_s = time.perf_counter() - t0
        results.append(res)
        beta = res.beta
    return results


def log_lambda_grid(lam_max: float, count: int, ratio: float = 1e-3) -> np.ndarray:
    """``count`` log-spaced penalties from ``lam_max`` down to ``ratio * lam_max``.

    A single-point grid is the lower endpoint alone.
    """
    if count < 1:
        raise ParameterError("grid count must be positive")
    if count == 1:
        return np.array([ratio * lam_max])
    return np.geomspace(lam_max, ratio * lam_max, count)

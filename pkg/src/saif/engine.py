"""Safe active incremental feature selection (SAIF) for the LASSO.

The solver keeps a small active set ``A`` and runs coordinate minimization
only there. After each round it bounds the sub-problem's dual optimum by a
ball, deletes active features the ball certifies as inactive, and recruits
the most correlated remaining features until every remaining feature is
certified inactive. The ball radius is shrunk by a factor ``delta < 1``
during early recruiting; ``delta`` reaches 1 before the run may stop, and
the run only stops after an unscaled screen of every excluded feature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cm import CmWorkspace, cm_epochs, unpenalized_coordinate_update
from .dual import Ball, _scaled_dual, gap_radius, intersect_balls, sequential_ball
from .exceptions import ConvergenceError, ParameterError
from .losses import Problem, dual_objective, duality_gap, gap_uncertainty, loss_grad
from .results import Counters, SolveResult, Trace

BALL_MODES = ("gap_only", "gap_and_sequential")
DELETE_RULES = ("hybrid", "safe", "scaled")


@dataclass
class SaifConfig:
    """Tuning knobs shared by SAIF and the baseline solvers.

    Parameters
    ----------
    epsilon : float
        Stopping duality gap.
    c : float
        Constant in the recruiting size ``h = ceil(c log((md + mx) / lam) log p)``.
    zeta : float
        Fraction of ``h`` bounding how many remaining features may still
        compete with a recruit (``h_tilde = ceil(zeta h)``).
    inner_k : int or None
        Coordinate-minimization passes per outer iteration. ``None`` balances
        work: each iteration runs enough passes that its coordinate updates
        match the inner products the following check computes (at least 10).
    delta_growth : float
        Factor applied to the radius shrink factor when recruiting stalls.
    ball_mode : {"gap_only", "gap_and_sequential"}
    max_outer : int
        Outer-iteration budget.
    refine_dual : bool
        Use the optimal feasible scaling of the dual point (squared loss).
    delete_rule : {"hybrid", "safe", "scaled"}
        Radius used by DEL. ``"safe"`` uses the unshrunk gap-ball radius,
        so only features that are zero at the sub-problem optimum leave.
        ``"scaled"`` uses the ``delta``-shrunk radius for every feature; it
        can drop features that still carry weight, which the next ADD
        recruits again, and the two steps may cycle. ``"hybrid"`` applies
        the safe test to all features and the shrunk test to features whose
        coefficient is already zero, so no deletion moves the predictor
        by more than the safe rule would.
    """

    epsilon: float = 1e-6
    c: float = 1.0
    zeta: float = 0.5
    inner_k: int | None = None
    delta_growth: float = 10.0
    ball_mode: str = "gap_only"
    max_outer: int = 200_000
    refine_dual: bool = True
    delete_rule: str = "hybrid"

    def validate(self) -> "SaifConfig":
        if not self.epsilon > 0:
            raise ParameterError(f"epsilon must be positive, got {self.epsilon!r}")
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got {self.c!r}")
        if not self.zeta > 0:
            raise ParameterError(f"zeta must be positive, got {self.zeta!r}")
        if not self.delta_growth > 1:
            raise ParameterError(f"delta_growth must exceed 1, got {self.delta_growth!r}")
        if self.inner_k is not None and int(self.inner_k) < 1:
            raise ParameterError(f"inner_k must be a positive integer, got {self.inner_k!r}")
        if self.delete_rule not in DELETE_RULES:
            raise ParameterError(f"delete_rule must be one of {DELETE_RULES}, got {self.delete_rule!r}")
        if self.ball_mode not in BALL_MODES:
            raise ParameterError(f"ball_mode must be one of {BALL_MODES}, got {self.ball_mode!r}")
        if int(self.max_outer) < 1:
            raise ParameterError("max_outer must be positive")
        return self

    def epochs_for(self, n_active: int, check_cost: int = 0) -> int:
        """Passes to run over ``n_active`` features before a check costing
        ``check_cost`` feature inner products."""
        if self.inner_k is not None:
            return int(self.inner_k)
        return max(1, math.ceil(max(check_cost, 10) / max(n_active, 1)))


@dataclass
class SaifState:
    """Active/remaining partition plus the current dual estimate."""

    mask: np.ndarray
    workspace: CmWorkspace
    theta: np.ndarray
    radius: float
    delta: float
    is_add: bool
    h: int
    h_tilde: int
    lam_max: float
    solved: bool = False
    counters: Counters = field(default_factory=Counters)
    last_added: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))
    last_deleted: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.intp))

    @property
    def active(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def remaining(self) -> np.ndarray:
        return np.flatnonzero(~self.mask)


def recruit_size(scores, lam, c, p) -> int:
    """``ceil(c log((md + mx) / lam) log p)`` clamped to ``[1, p]``."""
    if p <= 1 or scores.size == 0:
        return 1
    mx = float(np.max(scores))
    md = float(np.median(scores))
    arg = (md + mx) / lam
    if not arg > 1.0:
        return 1
    h = math.ceil(c * math.log(arg) * math.log(p))
    return int(min(max(h, 1), p))


def _top(scores, idx, k):
    """The ``k`` entries of ``idx`` with the largest scores, ties to smaller index."""
    order = np.lexsort((idx, -scores))
    return idx[order[:k]]


def init_active_set(problem: Problem, config: SaifConfig, beta0=None) -> SaifState:
    """Initial active set: the ``h`` features most correlated with ``f'(0)``.

    With a warm start ``beta0`` its support is kept and topped up with the
    ``h`` features most correlated with the gradient at ``beta0``.
    """
    config.validate()
    p, lam = problem.p, problem.lam
    scores = problem.null_scores()
    lam_max = float(scores.max()) if p else 0.0
    h = recruit_size(scores, lam, config.c, p)
    h_tilde = math.ceil(config.zeta * h)
    mask = np.zeros(p, dtype=bool)
    if lam >= lam_max:
        ws = CmWorkspace.zeros(problem)
        theta = -loss_grad(ws.linear_predictor, problem.y, problem.loss) / lam
        return SaifState(mask, ws, theta, 0.0, 1.0, False, h, h_tilde, lam_max, solved=True)
    if beta0 is not None and np.any(beta0):
        ws = CmWorkspace.from_beta(problem, beta0)
        mask[np.flatnonzero(ws.beta)] = True
        g = loss_grad(ws.linear_predictor, problem.y, problem.loss)
        rest = np.flatnonzero(~mask)
        mask[_top(np.abs(problem.X.tdot(g, rest)), rest, h)] = True
    else:
        ws = CmWorkspace.zeros(problem)
        mask[_top(scores, np.arange(p), h)] = True
    ws.active = np.flatnonzero(mask)
    delta = min(max(lam / lam_max, np.finfo(float).tiny), 1.0)
    theta = np.zeros(problem.n)
    state = SaifState(mask, ws, theta, np.inf, delta, True, h, h_tilde, lam_max)
    state.counters.peak_active = int(mask.sum())
    return state


def del_step(state: SaifState, problem: Problem, corr_active=None, safe_radius=None,
             rule: str = "scaled") -> SaifState:
    """Move every active feature with ``|x_i^T theta| + ||x_i|| r < 1`` to the remaining set.

    With ``rule="scaled"`` the test uses ``state.radius`` (already shrunk by
    ``delta``). With ``"safe"`` it uses ``safe_radius``; ``"hybrid"`` also
    drops zero-coefficient features that pass the shrunk test. Deleted
    coefficients are zeroed and the predictor is updated.
    """
    active = state.active
    state.last_deleted = np.zeros(0, dtype=np.intp)
    if active.size == 0:
        return state
    if corr_active is None:
        corr_active = problem.X.tdot(state.theta, active)
        state.counters.screen_ops += active.size
    score = np.abs(corr_active)
    norms = problem.X.norms[active]
    shrunk = score + norms * state.radius < 1.0
    if rule == "scaled" or safe_radius is None:
        hit = shrunk
    else:
        hit = score + norms * safe_radius < 1.0
        if rule == "hybrid":
            hit |= shrunk & (state.workspace.beta[active] == 0.0)
    drop = active[hit]
    for j in drop:
        state.workspace.set_coef(problem, j, 0.0)
    state.mask[drop] = False
    state.workspace.active = state.active
    state.counters.n_deleted += int(drop.size)
    state.last_deleted = drop
    return state


def stop_add_check(state: SaifState, problem: Problem, corr_remaining=None) -> bool:
    """True iff every remaining feature passes the screen with the current radius."""
    remaining = state.remaining
    if remaining.size == 0:
        return True
    if corr_remaining is None:
        corr_remaining = problem.X.tdot(state.theta, remaining)
        state.counters.screen_ops += remaining.size
    bound = np.abs(corr_remaining) + problem.X.norms[remaining] * state.radius
    return bool(np.all(bound < 1.0))


def add_step(state: SaifState, problem: Problem, config: SaifConfig, corr_remaining=None) -> SaifState:
    """Recruit up to ``h`` features, strongest first.

    Candidate ``i`` (largest ``|x_i^T theta|`` left in the remaining set) is
    recruited if fewer than ``h_tilde`` other remaining features have an
    upper bound ``|x_j^T theta| + ||x_j|| r`` reaching its lower bound
    ``||x_i^T theta| - ||x_i|| r|``; the first failure ends the step.
    """
    remaining = state.remaining
    state.last_added = np.zeros(0, dtype=np.intp)
    if remaining.size == 0:
        return state
    if corr_remaining is None:
        corr_remaining = problem.X.tdot(state.theta, remaining)
        state.counters.screen_ops += remaining.size
    scores = np.abs(corr_remaining)
    order = np.lexsort((remaining, -scores))
    s = scores[order]
    nrm = problem.X.norms[remaining][order]
    r = state.radius
    upper = s + nrm * r
    n_take = 0
    # earlier candidates have already moved, so V_i only ranges over later ones
    for k in range(min(state.h, order.size)):
        lower = abs(s[k] - nrm[k] * r)
        if np.count_nonzero(upper[k + 1:] >= lower) >= state.h_tilde:
            break
        n_take += 1
    added = remaining[order[:n_take]]
    if added.size:
        state.mask[added] = True
        state.workspace.active = state.active
        state.counters.n_added += len(added)
        state.counters.peak_active = max(state.counters.peak_active, int(state.mask.sum()))
    state.last_added = added
    return state


def _finish(problem, state, method, trace, primal, dual, gap, theta, radius, certificate, info=None):
    ws = state.workspace
    cnt = state.counters
    cnt.base_ops = ws.base_op_count
    cnt.epochs = ws.epochs
    return SolveResult(beta=ws.beta.copy(), gap=gap, certificate=certificate, primal=primal,
                       dual=dual, theta=theta, radius=radius, lam=problem.lam, method=method,
                       active=state.active, offset_coef=ws.offset_coef, counters=cnt, trace=trace,
                       time_s=trace.records[-1].t_s if trace.records else 0.0, info=info or {})


def solved_at_zero(problem: Problem, state: SaifState, method: str, trace: Trace) -> SolveResult:
    ws = state.workspace
    theta = state.theta
    primal = ws.objective(problem)
    dual = dual_objective(problem, theta)
    gap = duality_gap(primal, dual)
    trace.log("CERT", 0, 0, gap, dual)
    return _finish(problem, state, method, trace, primal, dual, gap, theta, 0.0, True)


def solve(problem: Problem, config: SaifConfig | None = None, beta0=None) -> SolveResult:
    """Solve the LASSO ``problem`` to duality gap ``config.epsilon``.

    Raises
    ------
    ConvergenceError
        When ``config.max_outer`` outer iterations pass without a certified
        stop; the best iterate is attached with ``certificate=False``.
    """
    cfg = (config or SaifConfig()).validate()
    trace = Trace()
    state = init_active_set(problem, cfg, beta0)
    if state.solved:
        return solved_at_zero(problem, state, "saif", trace)

    X, ws, cnt = problem.X, state.workspace, state.counters
    norms = X.norms
    null_scores = problem.null_scores()
    use_seq = cfg.ball_mode == "gap_and_sequential"
    eps = cfg.epsilon
    best = None  # (dual value, theta) feasible for the current active set
    primal = dual = gap = math.inf
    theta = state.theta
    r_gap = math.inf

    for it in range(1, int(cfg.max_outer) + 1):
        cnt.outer_iter = it
        active = state.active
        if active.size:
            # the next check touches every feature in the worst case
            cm_epochs(ws, problem, cfg.epochs_for(active.size, problem.p))
        if problem.offset is not None:
            unpenalized_coordinate_update(ws, problem)

        if active.size:
            theta, _, corr_a = _scaled_dual(problem, ws.linear_predictor, active, cfg.refine_dual)
            cnt.screen_ops += active.size
        else:
            theta = -loss_grad(ws.linear_predictor, problem.y, problem.loss) / problem.lam
            corr_a = np.zeros(0)
        dual = dual_objective(problem, theta)
        if best is not None and best[0] > dual:
            dual, theta = best
            corr_a = X.tdot(theta, active)
            cnt.screen_ops += active.size
        else:
            best = (dual, theta)
        primal = ws.objective(problem)
        gap = duality_gap(primal, dual)
        r_gap = gap_radius(gap, problem, gap_uncertainty(primal, dual))

        center, radius, corr_c = theta, r_gap, corr_a
        if use_seq and active.size:
            lam0 = float(null_scores[active].max())
            if problem.lam < lam0:
                z0 = problem.null_predictor()
                theta0 = -loss_grad(z0, problem.y, problem.loss) / lam0
                seq = sequential_ball(theta0, lam0, problem.lam, problem, feasible_theta=theta)
                ball = intersect_balls(seq, Ball(theta, r_gap))
                if ball.radius < r_gap:
                    center, radius = ball.center, ball.radius
                    corr_c = X.tdot(center, active)
                    cnt.screen_ops += active.size
        state.theta = center
        state.radius = state.delta * radius
        trace.log("EPOCH", it, active.size, gap, dual)

        if not state.is_add and gap < eps:
            remaining = state.remaining
            corr_r = X.tdot(theta, remaining)
            cnt.screen_ops += remaining.size
            ok = bool(np.all(np.abs(corr_r) + norms[remaining] * r_gap < 1.0))
            trace.log("CERT", it, active.size, gap, dual)
            if ok:
                return _finish(problem, state, "saif", trace, primal, dual, gap, theta, r_gap, True,
                               info=_meta(cfg, state))
            state.is_add = True

        del_step(state, problem, corr_c, radius, cfg.delete_rule)
        if state.last_deleted.size:
            trace.log("DEL", it, state.mask.sum(), gap, dual)
        if not state.is_add:
            continue

        remaining = state.remaining
        corr_r = X.tdot(state.theta, remaining)
        cnt.screen_ops += remaining.size
        if stop_add_check(state, problem, corr_r):
            if state.delta < 1.0:
                state.delta = min(cfg.delta_growth * state.delta, 1.0)
                trace.log("DELTA", it, state.mask.sum(), gap, dual)
            else:
                state.is_add = False
                trace.log("DELTA", it, state.mask.sum(), gap, dual)
                continue
        add_step(state, problem, cfg, corr_r)
        if state.last_added.size:
            best = None
            trace.log("ADD", it, state.mask.sum(), gap, dual)

    result = _finish(problem, state, "saif", trace, primal, dual, gap, theta, r_gap, False,
                     info=_meta(cfg, state))
    raise ConvergenceError(f"SAIF did not certify a solution within {cfg.max_outer} outer iterations",
                           result)


def center_on_offset(problem: Problem):
    """Reparameterize so that every penalized column is orthogonal to the offset.

    With ``c`` the offset column and ``m = X^T c / ||c||^2``,
    ``X beta + b c = (X - c m^T) beta + (b + m^T beta) c``. The two problems
    have the same objective at corresponding points, for any loss.

    Returns
    -------
    centered : Problem
    m : ndarray of shape (p,)
    """
    c = problem.offset
    if c is None or problem.offset_norm_sq == 0.0:
        return problem, np.zeros(problem.p)
    m = (c @ problem.X.data) / problem.offset_norm_sq
    centered = Problem(problem.X.data - np.outer(c, m), problem.y, problem.loss, problem.lam,
                       offset=c)
    return centered, m


def solve_offset(problem: Problem, config: SaifConfig | None = None, beta0=None,
                 solver=None) -> SolveResult:
    """Solve a problem with an offset column after centering on it.

    Alternating coordinate steps between the penalized coefficients and
    the offset converge slowly when the offset column is nearly collinear
    with a feature (uncentered data, fused reparameterizations). Solving the
    centered problem of :func:`center_on_offset` avoids that; the offset
    coefficient is mapped back, and the objective, dual point and gap are
    those of the original problem.
    """
    solver = solver or solve
    if problem.offset is None:
        return solver(problem, config, beta0=beta0)
    centered, m = center_on_offset(problem)
    res = solver(centered, config, beta0=beta0)
    res.offset_coef = float(res.offset_coef - m @ res.beta)
    res.info["offset"] = "centered"
    return res


def _meta(cfg: SaifConfig, state: SaifState) -> dict:
    return {"c": cfg.c, "zeta": cfg.zeta, "h": state.h, "h_tilde": state.h_tilde,
            "delta_growth": cfg.delta_growth, "ball_mode": cfg.ball_mode,
            "delete_rule": cfg.delete_rule,
            "tau_normalization": "active set"}

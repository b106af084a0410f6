"""Cyclic coordinate minimization on a restricted column set.

The kernels keep the linear predictor ``z = X beta (+ b * offset)`` up to date
incrementally so one coordinate update costs a single pass over one column.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np

from .losses import Loss, Problem, loss_grad, loss_hess, loss_sum

RESYNC_EVERY = 1000
NEWTON_MAX_ITER = 20
NEWTON_TOL = 1e-12


def soft_threshold(z, t):
    """``sign(z) * max(|z| - t, 0)``.

    >>> soft_threshold(3.0, 1.0), soft_threshold(-0.5, 1.0), soft_threshold(-3.0, 1.0)
    (2.0, 0.0, -2.0)
    """
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


@numba.njit(cache=True)
def _st(v, t):
    if v > t:
        return v - t
    if v < -t:
        return v + t
    return 0.0


# reassociating the column dot products lets them vectorize
@numba.njit(cache=True, fastmath={"reassoc", "contract"})
def _epochs_squared(X, y, beta, z, active, norms_sq, lam, n_epochs):
    n = X.shape[0]
    updates = 0
    for _ in range(n_epochs):
        for k in range(active.shape[0]):
            j = active[k]
            nsq = norms_sq[j]
            if nsq == 0.0:
                continue
            g = 0.0
            for i in range(n):
                g += X[i, j] * (y[i] - z[i])
            old = beta[j]
            new = _st(g + nsq * old, lam) / nsq
            d = new - old
            if d != 0.0:
                for i in range(n):
                    z[i] += d * X[i, j]
                beta[j] = new
            updates += 1
    return updates


@numba.njit(cache=True, fastmath={"reassoc", "contract"})
def _epochs_logistic(X, y, beta, z, active, norms_sq, lam, n_epochs):
    n = X.shape[0]
    updates = 0
    for _ in range(n_epochs):
        for k in range(active.shape[0]):
            j = active[k]
            nsq = norms_sq[j]
            if nsq == 0.0:
                continue
            g = 0.0
            for i in range(n):
                # f'(z) = -y * sigmoid(-y z)
                g -= X[i, j] * y[i] / (1.0 + np.exp(y[i] * z[i]))
            lip = 0.25 * nsq
            old = beta[j]
            new = _st(old * lip - g, lam) / lip
            d = new - old
            if d != 0.0:
                for i in range(n):
                    z[i] += d * X[i, j]
                beta[j] = new
            updates += 1
    return updates


@dataclass
class CmWorkspace:
    """Mutable coordinate-minimization state for one solve.

    ``beta`` is stored over the full feature range; entries outside
    ``active`` are kept at zero by the callers that shrink the set.
    """

    beta: np.ndarray
    linear_predictor: np.ndarray
    active: np.ndarray
    offset_coef: float = 0.0
    base_op_count: int = 0
    epochs: int = 0
    _since_sync: int = field(default=0, repr=False)

    @classmethod
    def zeros(cls, problem: Problem, active=None):
        beta = np.zeros(problem.p)
        b0 = problem.null_offset_coef()
        ws = cls(beta=beta, linear_predictor=problem.null_predictor().copy(),
                 active=np.asarray([] if active is None else active, dtype=np.intp),
                 offset_coef=b0)
        return ws

    @classmethod
    def from_beta(cls, problem: Problem, beta, active=None, offset_coef=None):
        beta = np.array(beta, dtype=float)
        if active is None:
            active = np.flatnonzero(beta)
        ws = cls(beta=beta, linear_predictor=np.zeros(problem.n),
                 active=np.asarray(active, dtype=np.intp),
                 offset_coef=problem.null_offset_coef() if offset_coef is None else float(offset_coef))
        ws.resync(problem)
        return ws

    @property
    def active_beta(self) -> np.ndarray:
        return self.beta[self.active]

    def expected_predictor(self, problem: Problem) -> np.ndarray:
        nz = np.flatnonzero(self.beta)
        z = problem.X.data[:, nz] @ self.beta[nz] if nz.size else np.zeros(problem.n)
        if problem.offset is not None and self.offset_coef:
            z = z + self.offset_coef * problem.offset
        return z

    def resync(self, problem: Problem):
        self.linear_predictor = self.expected_predictor(problem)
        self._since_sync = 0

    def set_coef(self, problem: Problem, j: int, value: float):
        d = value - self.beta[j]
        if d != 0.0:
            self.linear_predictor += d * problem.X.data[:, j]
            self.beta[j] = value

    def objective(self, problem: Problem) -> float:
        return loss_sum(self.linear_predictor, problem) + problem.lam * float(np.abs(self.beta).sum())


def cm_epochs(workspace: CmWorkspace, problem: Problem, K: int) -> CmWorkspace:
    """Run ``K`` cyclic passes of coordinate updates over ``workspace.active``.

    Squared loss uses the exact coordinate minimizer; logistic loss takes a
    proximal step with the coordinate Lipschitz bound ``||x_i||^2 / 4``.
    Zero-norm columns are skipped and their coefficient stays at zero.
    """
    if K <= 0 or workspace.active.size == 0:
        return workspace
    kernel = _epochs_squared if problem.loss is Loss.SQUARED else _epochs_logistic
    X = problem.X
    updates = kernel(X.data, problem.y, workspace.beta, workspace.linear_predictor,
                     np.ascontiguousarray(workspace.active, dtype=np.int64), X.norms_sq,
                     problem.lam, int(K))
    workspace.base_op_count += int(updates)
    workspace.epochs += int(K)
    workspace._since_sync += int(K)
    if workspace._since_sync >= RESYNC_EVERY:
        workspace.resync(problem)
    return workspace


def minimize_offset(z, y, column, loss, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER) -> float:
    """Step ``t`` minimizing ``sum f(z + t * column, y)`` over the real line.

    Closed form for the squared loss. For the logistic loss a Newton
    iteration safeguarded by a bisection bracket on the (monotone) 1-D
    derivative.
    """
    loss = Loss.coerce(loss)
    nsq = float(column @ column)
    if nsq == 0.0:
        return 0.0
    if loss is Loss.SQUARED:
        return float(column @ (y - z)) / nsq

    def deriv(t):
        return float(column @ loss_grad(z + t * column, y, loss))

    g = deriv(0.0)
    if abs(g) <= tol:
        return 0.0
    # bracket the root of the increasing derivative
    step = 4.0 * abs(g) / nsq + 1e-12
    direction = -1.0 if g > 0 else 1.0
    lo, hi = (0.0, direction * step) if direction > 0 else (direction * step, 0.0)
    for _ in range(200):
        if direction > 0 and deriv(hi) < 0:
            lo, hi = hi, 2.0 * hi
        elif direction < 0 and deriv(lo) > 0:
            lo, hi = 2.0 * lo, lo
        else:
            break
    t = 0.0
    for _ in range(max_iter):
        zt = z + t * column
        g = float(column @ loss_grad(zt, y, loss))
        if abs(g) <= tol:
            break
        if g > 0:
            hi = min(hi, t)
        else:
            lo = max(lo, t)
        h = float((column * column) @ loss_hess(zt, y, loss))
        t_new = t - g / h if h > 0 else 0.5 * (lo + hi)
        if not lo < t_new < hi:
            t_new = 0.5 * (lo + hi)
        t = t_new
    return t


def unpenalized_coordinate_update(workspace: CmWorkspace, problem: Problem, column=None) -> CmWorkspace:
    """Exactly minimize over the coefficient of an unpenalized column.

    ``column`` defaults to the problem's offset column.
    """
    if column is None:
        column = problem.offset
    if column is None:
        return workspace
    t = minimize_offset(workspace.linear_predictor, problem.y, column, problem.loss)
    if t != 0.0:
        workspace.linear_predictor += t * column
        workspace.offset_coef += t
    return workspace

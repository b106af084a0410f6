"""Loss functions, convex conjugates and LASSO objective values.

Two losses are supported, both written per sample as ``f(z, y)`` where ``z``
is the linear predictor:

* squared:  ``f(z, y) = (z - y)**2 / 2``        (1-smooth)
* logistic: ``f(z, y) = log(1 + exp(-y z))``   (1/4-smooth, ``y`` in {-1, +1})

The primal LASSO problem is ``min_b sum_j f(x_j b, y_j) + lam ||b||_1`` and
its dual is ``max_theta -sum_j f*(-lam theta_j, y_j)`` subject to
``|x_i^T theta| <= 1`` for every feature ``i``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.special import expit, xlogy

from .exceptions import ConsistencyError, DimensionError, DomainError, ParameterError

# Slack for rounding error in gap and radicand computations, scaled by the
# magnitude of the objective values involved.
GAP_SLACK = 1e-12


class Loss(str, enum.Enum):
    SQUARED = "squared"
    LOGISTIC = "logistic"

    @property
    def alpha(self) -> float:
        """Smoothness constant of the per-sample loss."""
        return 1.0 if self is Loss.SQUARED else 0.25

    @property
    def gamma(self) -> float | None:
        """Strong-convexity constant, recorded for instrumentation only.

        The logistic loss is not strongly convex on the whole real line, so
        it has no such constant.
        """
        return 1.0 if self is Loss.SQUARED else None

    @classmethod
    def coerce(cls, value) -> "Loss":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ParameterError(f"unknown loss {value!r}; expected 'squared' or 'logistic'") from None


def _check_same_length(a, b):
    if np.shape(a) != np.shape(b):
        raise DimensionError(f"length mismatch: {np.shape(a)} vs {np.shape(b)}")


def loss_value(z, y, loss) -> np.ndarray:
    """Per-sample loss values ``f(z_j, y_j)``."""
    loss = Loss.coerce(loss)
    z = np.asarray(z, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_same_length(z, y)
    if loss is Loss.SQUARED:
        return 0.5 * (z - y) ** 2
    return np.logaddexp(0.0, -y * z)


def loss_grad(linear_predictor, y, loss) -> np.ndarray:
    """Elementwise derivative ``f'(z_j, y_j)`` with respect to ``z``.

    Examples
    --------
    >>> loss_grad(np.zeros(2), np.array([1.0, -2.0]), "squared")
    array([-1.,  2.])
    >>> loss_grad(np.zeros(2), np.array([1.0, -1.0]), "logistic")
    array([-0.5,  0.5])
    """
    loss = Loss.coerce(loss)
    z = np.asarray(linear_predictor, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_same_length(z, y)
    if loss is Loss.SQUARED:
        return z - y
    return -y * expit(-y * z)


def loss_hess(z, y, loss) -> np.ndarray:
    """Elementwise second derivative of the loss."""
    loss = Loss.coerce(loss)
    z = np.asarray(z, dtype=float)
    if loss is Loss.SQUARED:
        return np.ones_like(z)
    s = expit(-np.asarray(y, dtype=float) * z)
    return s * (1.0 - s)


def _logistic_conjugate_arg(v, y):
    u = -np.asarray(v, dtype=float) * np.asarray(y, dtype=float)
    if np.any(u < -GAP_SLACK) or np.any(u > 1.0 + GAP_SLACK):
        bad = np.asarray(u).ravel()
        worst = bad[np.argmax(np.maximum(-bad, bad - 1.0))]
        raise DomainError(f"logistic conjugate evaluated at -v*y = {worst!r}, outside [0, 1]")
    return np.clip(u, 0.0, 1.0)


def conjugate(v, y, loss):
    """Convex conjugate ``f*(v, y)`` of the per-sample loss.

    Works elementwise on arrays. The logistic conjugate uses the convention
    ``0 log 0 = 0`` and raises :class:`DomainError` when ``-v y`` leaves
    ``[0, 1]``.
    """
    loss = Loss.coerce(loss)
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if loss is Loss.SQUARED:
        out = 0.5 * v * v + v * y
    else:
        u = _logistic_conjugate_arg(v, y)
        out = xlogy(u, u) + xlogy(1.0 - u, 1.0 - u)
    return out if out.ndim else float(out)


def conjugate_grad(v, y, loss):
    """Derivative of :func:`conjugate` with respect to ``v``."""
    loss = Loss.coerce(loss)
    v = np.asarray(v, dtype=float)
    y = np.asarray(y, dtype=float)
    if loss is Loss.SQUARED:
        return v + y
    u = _logistic_conjugate_arg(v, y)
    with np.errstate(divide="ignore"):
        return -y * (np.log(u) - np.log1p(-u))


class DesignMatrix:
    """Dense design matrix with column-major storage and cached column norms.

    Parameters
    ----------
    data : array-like of shape (n_samples, n_features)
    """

    def __init__(self, data):
        if isinstance(data, DesignMatrix):
            data = data.data
        arr = np.asfortranarray(np.asarray(data, dtype=np.float64))
        if arr.ndim != 2:
            raise DimensionError(f"design matrix must be 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("design matrix contains NaN or Inf")
        self.data = arr
        self.norms_sq = np.einsum("ij,ij->j", arr, arr)
        self.norms = np.sqrt(self.norms_sq)

    @property
    def shape(self):
        return self.data.shape

    @property
    def n(self) -> int:
        return self.data.shape[0]

    @property
    def p(self) -> int:
        return self.data.shape[1]

    def column(self, i) -> np.ndarray:
        return self.data[:, i]

    def tdot(self, v, columns=None) -> np.ndarray:
        """Inner products ``x_i^T v`` for the requested columns (all by default)."""
        if columns is None:
            return self.data.T @ v
        columns = np.asarray(columns, dtype=np.intp)
        if 2 * columns.size > self.p:
            # a full product is cheaper than gathering most of the columns
            return (self.data.T @ v)[columns]
        return self.data[:, columns].T @ v

    def matvec(self, beta) -> np.ndarray:
        return self.data @ beta

    def __repr__(self):
        return f"DesignMatrix(n={self.n}, p={self.p})"


@dataclass
class Problem:
    """A LASSO instance ``(X, y, loss, lam)``.

    ``offset`` optionally holds one extra, unpenalized column (an intercept
    or the constant direction of a fused-LASSO reparameterization).
    """

    X: DesignMatrix
    y: np.ndarray
    loss: Loss = Loss.SQUARED
    lam: float = 1.0
    offset: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        if not isinstance(self.X, DesignMatrix):
            self.X = DesignMatrix(self.X)
        self.loss = Loss.coerce(self.loss)
        self.y = np.ascontiguousarray(self.y, dtype=np.float64).ravel()
        if self.X.n == 0:
            raise ParameterError("problem has no samples (n = 0)")
        if self.y.shape[0] != self.X.n:
            raise DimensionError(f"X has {self.X.n} rows but y has {self.y.shape[0]} entries")
        if not np.all(np.isfinite(self.y)):
            raise ParameterError("labels contain NaN or Inf")
        if not np.isfinite(self.lam) or self.lam <= 0:
            raise ParameterError(f"lambda must be positive, got {self.lam!r}")
        self.lam = float(self.lam)
        if self.loss is Loss.LOGISTIC and not np.all(np.abs(self.y) == 1.0):
            raise ParameterError("logistic labels must be in {-1, +1}")
        if self.offset is not None:
            self.offset = np.ascontiguousarray(self.offset, dtype=np.float64).ravel()
            if self.offset.shape[0] != self.X.n:
                raise DimensionError("offset column length does not match n")

    @property
    def n(self) -> int:
        return self.X.n

    @property
    def p(self) -> int:
        return self.X.p

    def with_lam(self, lam) -> "Problem":
        """Same data at a different penalty; cached quantities are shared."""
        return replace(self, lam=lam, _cache=self._cache)

    @property
    def offset_norm_sq(self) -> float:
        return 0.0 if self.offset is None else float(self.offset @ self.offset)

    def null_offset_coef(self) -> float:
        """Optimal unpenalized coefficient when every penalized one is zero."""
        if "b0" not in self._cache:
            if self.offset is None or self.offset_norm_sq == 0.0:
                b0 = 0.0
            else:
                from .cm import minimize_offset

                b0 = minimize_offset(np.zeros(self.n), self.y, self.offset, self.loss)
            self._cache["b0"] = b0
        return self._cache["b0"]

    def null_predictor(self) -> np.ndarray:
        """Linear predictor at the all-zero penalized solution."""
        b0 = self.null_offset_coef()
        if self.offset is None or b0 == 0.0:
            return np.zeros(self.n)
        return b0 * self.offset

    def null_scores(self) -> np.ndarray:
        """``|x_i^T f'(z0)|`` for every feature, ``z0`` the null predictor."""
        if "scores" not in self._cache:
            g = loss_grad(self.null_predictor(), self.y, self.loss)
            self._cache["scores"] = np.abs(self.X.tdot(g))
        return self._cache["scores"]


def loss_sum(z, problem: Problem) -> float:
    return float(np.sum(loss_value(z, problem.y, problem.loss)))


def primal_objective(problem: Problem, beta, support=None, offset_coef: float = 0.0) -> float:
    """``sum_j f(x_j beta, y_j) + lam ||beta||_1``.

    Parameters
    ----------
    beta : array-like
        Either a full-length coefficient vector, or (with ``support``) the
        coefficients on that index set. Indices outside the set count as zero.
    support : array-like of int, optional
    offset_coef : float
        Coefficient of the unpenalized offset column, if the problem has one.
    """
    beta = np.asarray(beta, dtype=float)
    if support is None:
        if beta.shape != (problem.p,):
            raise DimensionError(f"beta has shape {beta.shape}, expected ({problem.p},)")
        z = problem.X.matvec(beta)
    else:
        support = np.asarray(support, dtype=np.intp)
        if beta.shape != support.shape:
            raise DimensionError("beta and support lengths differ")
        z = problem.X.data[:, support] @ beta if support.size else np.zeros(problem.n)
    if problem.offset is not None and offset_coef:
        z = z + offset_coef * problem.offset
    return loss_sum(z, problem) + problem.lam * float(np.abs(beta).sum())


def dual_objective(problem: Problem, theta) -> float:
    """``-sum_j f*(-lam theta_j, y_j)``."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != problem.y.shape:
        raise DimensionError(f"theta has shape {theta.shape}, expected {problem.y.shape}")
    if problem.loss is Loss.SQUARED:
        lam = problem.lam
        return float(lam * (problem.y @ theta) - 0.5 * lam * lam * (theta @ theta))
    return -float(np.sum(conjugate(-problem.lam * theta, problem.y, problem.loss)))


def gap_uncertainty(primal: float, dual: float) -> float:
    """Rounding noise in ``primal - dual``: the slack used by :func:`duality_gap`."""
    return GAP_SLACK * max(1.0, abs(primal), abs(dual))


def duality_gap(primal: float, dual: float) -> float:
    """``primal - dual`` clamped at zero against rounding noise.

    Raises
    ------
    ConsistencyError
        If the gap is negative beyond the rounding slack.
    """
    gap = primal - dual
    if gap < 0.0:
        if gap < -gap_uncertainty(primal, dual):
            raise ConsistencyError(f"negative duality gap {gap!r} (primal {primal!r}, dual {dual!r})")
        return 0.0
    return gap

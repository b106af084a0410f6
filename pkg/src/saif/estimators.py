"""scikit-learn compatible estimators on top of the functional solvers.

The penalty ``lam`` multiplies ``||beta||_1`` against the *summed* loss,
not the sample-averaged one used by :class:`sklearn.linear_model.Lasso`;
``lam = n * alpha`` converts between the two.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.utils.multiclass import check_classification_targets, type_of_target
from sklearn.utils.validation import check_is_fitted, validate_data

from . import baselines, engine
from .engine import SaifConfig
from .exceptions import ParameterError
from .datasets import gen_chain_tree
from .fused import FeatureTree, solve_fused
from .losses import Loss, Problem

_SOLVERS = {"saif": engine.solve, "dynamic": baselines.solve_dynamic, "plain": baselines.solve_plain}


class _SaifBase(BaseEstimator):
    def _config(self) -> SaifConfig:
        return SaifConfig(epsilon=self.epsilon, c=self.c, zeta=self.zeta, inner_k=self.inner_k,
                          ball_mode=self.ball_mode, max_outer=self.max_outer).validate()

    def _solver(self):
        try:
            return _SOLVERS[self.method]
        except KeyError:
            raise ParameterError(f"method must be one of {sorted(_SOLVERS)}, got {self.method!r}") from None

    def _fit_problem(self, X, y, loss):
        offset = np.ones(X.shape[0]) if self.fit_intercept else None
        problem = Problem(X, y, loss, self.lam, offset=offset)
        result = engine.solve_offset(problem, self._config(), solver=self._solver())
        self.result_ = result
        self.coef_ = result.beta
        self.intercept_ = float(result.offset_coef)
        self.n_iter_ = result.counters.outer_iter
        self.dual_gap_ = result.gap
        return self

    def _linear(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.coef_ + self.intercept_


class SaifLasso(RegressorMixin, _SaifBase):
    """Squared-loss LASSO ``1/2 ||y - X b - b0||^2 + lam ||b||_1``.

    Parameters
    ----------
    lam : float
        Penalty on the summed loss.
    epsilon : float
        Duality-gap tolerance.
    fit_intercept : bool
        Fit an unpenalized constant.
    method : {"saif", "dynamic", "plain"}
    c, zeta, inner_k, ball_mode, max_outer
        Passed to :class:`SaifConfig`.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    result_ : SolveResult
    """

    def __init__(self, lam=1.0, epsilon=1e-6, fit_intercept=False, method="saif", c=1.0, zeta=0.5,
                 inner_k=None, ball_mode="gap_only", max_outer=200_000):
        self.lam = lam
        self.epsilon = epsilon
        self.fit_intercept = fit_intercept
        self.method = method
        self.c = c
        self.zeta = zeta
        self.inner_k = inner_k
        self.ball_mode = ball_mode
        self.max_outer = max_outer

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        return self._fit_problem(X, y, Loss.SQUARED)

    def predict(self, X):
        return self._linear(X)


class SaifLogisticRegression(ClassifierMixin, _SaifBase):
    """L1-penalized binary logistic regression.

    The two classes are mapped to -1 (``classes_[0]``) and +1
    (``classes_[1]``). Parameters are as for :class:`SaifLasso`.
    """

    def __init__(self, lam=1.0, epsilon=1e-6, fit_intercept=False, method="saif", c=1.0, zeta=0.5,
                 inner_k=None, ball_mode="gap_only", max_outer=200_000):
        self.lam = lam
        self.epsilon = epsilon
        self.fit_intercept = fit_intercept
        self.method = method
        self.c = c
        self.zeta = zeta
        self.inner_k = inner_k
        self.ball_mode = ball_mode
        self.max_outer = max_outer

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        return tags

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        classes = np.unique(y)
        if classes.size < 2:
            raise ValueError("Classifier can't train when only one class is present.")
        if type_of_target(y) != "binary":
            raise ValueError(f"Only binary classification is supported, got {type_of_target(y)!r} targets")
        self.classes_ = classes
        signed = np.where(y == self.classes_[1], 1.0, -1.0)
        return self._fit_problem(X, signed, Loss.LOGISTIC)

    def decision_function(self, X):
        return self._linear(X)

    def predict_proba(self, X):
        z = self.decision_function(X)
        p1 = 1.0 / (1.0 + np.exp(-z))
        return np.column_stack([1.0 - p1, p1])

    def predict(self, X):
        check_is_fitted(self, "classes_")
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


class SaifFusedLasso(RegressorMixin, BaseEstimator):
    """Tree fused LASSO ``sum f(x_j b) + lam sum_{(a, c) in E} |b_a - b_c|``.

    Parameters
    ----------
    lam : float
    edges : sequence of (int, int), optional
        Zero-based feature pairs forming a tree over all features. The
        default is the chain ``0-1-...-(p-1)``.
    loss : {"squared", "logistic"}
    root : int, optional
        Root of the reparameterization (default: largest-degree node).
    epsilon, c, zeta, inner_k, max_outer
        Passed to :class:`SaifConfig`.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
        Coefficients in original coordinates.
    result_ : FusedResult
    """

    def __init__(self, lam=1.0, edges=None, loss="squared", root=None, epsilon=1e-6, c=1.0, zeta=0.5,
                 inner_k=None, max_outer=200_000):
        self.lam = lam
        self.edges = edges
        self.loss = loss
        self.root = root
        self.epsilon = epsilon
        self.c = c
        self.zeta = zeta
        self.inner_k = inner_k
        self.max_outer = max_outer

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64, y_numeric=True)
        p = X.shape[1]
        edges = gen_chain_tree(p).edges if self.edges is None else self.edges
        tree = FeatureTree(p, edges, root=self.root)
        cfg = SaifConfig(epsilon=self.epsilon, c=self.c, zeta=self.zeta, inner_k=self.inner_k,
                         max_outer=self.max_outer)
        self.result_ = solve_fused(X, y, tree, self.lam, self.loss, cfg)
        self.coef_ = self.result_.beta
        self.n_iter_ = self.result_.counters.outer_iter
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return X @ self.coef_

import warnings

import numpy as np
import pytest
from sklearn.utils.estimator_checks import parametrize_with_checks

import oracles
from saif.engine import center_on_offset
from saif.estimators import SaifFusedLasso, SaifLasso, SaifLogisticRegression
from saif.exceptions import ParameterError
from saif.losses import Problem


@parametrize_with_checks([SaifLasso(lam=0.1), SaifLasso(lam=0.1, fit_intercept=True),
                          SaifLogisticRegression(lam=0.1),
                          SaifLogisticRegression(lam=0.1, fit_intercept=True),
                          SaifFusedLasso(lam=0.1)])
def test_sklearn_compatible(estimator, check):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        check(estimator)


def data(seed=0, n=30, p=40, shift=0.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, p)) + shift
    y = X[:, :3] @ np.array([2.0, -1.0, 1.0]) + 0.1 * rng.standard_normal(n) + 5.0
    return X, y


def test_lasso_matches_oracle_with_intercept():
    X, y = data(shift=50.0)
    est = SaifLasso(lam=2.0, fit_intercept=True, epsilon=1e-10).fit(X, y)
    beta, b, _ = oracles.fista(X - X.mean(0), y, 2.0, offset=np.ones(30), tol=1e-11)
    # centering only moves the intercept
    b_orig = b - X.mean(0) @ beta
    ref = oracles.primal(X, y, 2.0, beta, offset=np.ones(30), b=b_orig)
    got = oracles.primal(X, y, 2.0, est.coef_, offset=np.ones(30), b=est.intercept_)
    assert got == pytest.approx(ref, abs=1e-8)
    assert est.result_.certificate
    np.testing.assert_allclose(est.predict(X), X @ est.coef_ + est.intercept_)


@pytest.mark.parametrize("method", ["saif", "dynamic", "plain"])
def test_methods_agree(method):
    X, y = data(1)
    a = SaifLasso(lam=1.0, method=method, epsilon=1e-10).fit(X, y)
    b = SaifLasso(lam=1.0, epsilon=1e-10).fit(X, y)
    assert a.result_.primal == pytest.approx(b.result_.primal, abs=1e-9)


def test_bad_method():
    X, y = data()
    with pytest.raises(ParameterError):
        SaifLasso(method="lars").fit(X, y)


def test_logistic_classes_and_proba():
    X, y = data(2)
    labels = np.where(y > np.median(y), "hi", "lo")
    est = SaifLogisticRegression(lam=0.5, fit_intercept=True).fit(X, labels)
    assert list(est.classes_) == ["hi", "lo"]
    proba = est.predict_proba(X)
    np.testing.assert_allclose(proba.sum(1), 1.0)
    assert np.all((proba[:, 1] > 0.5) == (est.predict(X) == "lo"))
    assert est.score(X, labels) > 0.8


def test_logistic_rejects_multiclass():
    X, y = data()
    with pytest.raises(ValueError, match="binary"):
        SaifLogisticRegression().fit(X, np.arange(30) % 3)


def test_fused_default_chain_and_edges():
    rng = np.random.default_rng(3)
    X = rng.standard_normal((25, 8))
    y = X @ np.r_[np.ones(4), -np.ones(4)] + 0.05 * rng.standard_normal(25)
    chain = SaifFusedLasso(lam=1.0, epsilon=1e-10).fit(X, y)
    explicit = SaifFusedLasso(lam=1.0, edges=[(i, i + 1) for i in range(7)], epsilon=1e-10).fit(X, y)
    np.testing.assert_allclose(chain.coef_, explicit.coef_, atol=1e-8)
    assert chain.result_.fused_penalty < np.abs(np.diff(np.linalg.lstsq(X, y, rcond=None)[0])).sum()
    flat = SaifFusedLasso(lam=1e4).fit(X, y)
    assert np.ptp(flat.coef_) < 1e-9


def test_center_on_offset_is_exact():
    rng = np.random.default_rng(4)
    X = rng.standard_normal((6, 3)) + 10
    c = np.ones(6)
    pr = Problem(X, rng.standard_normal(6), offset=c)
    cen, m = center_on_offset(pr)
    np.testing.assert_allclose(c @ cen.X.data, 0.0, atol=1e-12)
    beta, b = rng.standard_normal(3), 0.7
    np.testing.assert_allclose(cen.X.data @ beta + (b + m @ beta) * c, X @ beta + b * c)

import math

import numpy as np
import pytest
import statsmodels.api as sm
from hypothesis import given, settings, strategies as st

from stocksent.errors import RankDeficiencyError, ShapeError
from stocksent.featurize import DesignMatrix
from stocksent.glm import (FitResult, fisher_information, fit, logistic, loglik, predict, predict_proba, score)


def test_loglik_at_zero():
    X = np.ones((7, 2))
    assert loglik(np.zeros(2), X, np.array([1, 0, 1, 1, 0, 0, 1])) == pytest.approx(7 * math.log(0.5))


def test_loglik_hand_value():
    assert loglik([0.0, 1.0], [[1.0, 2.0]], [1]) == pytest.approx(-0.12692801104297263, abs=1e-12)


def test_loglik_saturation_monotone():
    vals = [loglik([b], [[1.0]], [1]) for b in (1, 5, 10, 20, 30)]
    assert all(a < b < 0 for a, b in zip(vals, vals[1:]))
    # the limit is reached in floating point without going positive
    assert loglik([1000.0], [[1.0]], [1]) == 0.0


def test_loglik_shape_error():
    with pytest.raises(ShapeError):
        loglik([0.0], np.ones((3, 2)), [1, 0, 1])


def test_logistic_extremes():
    out = logistic([-1000.0, 0.0, 1000.0])
    assert list(out) == [0.0, 0.5, 1.0]
    assert logistic([1.0])[0] == pytest.approx(0.7310585786300049)


def test_fisher_information_symmetric_psd():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(30, 3))
    info = fisher_information(rng.normal(size=3), X)
    assert np.allclose(info, info.T)
    assert np.all(np.linalg.eigvalsh(info) > 0)


def test_intercept_only_balanced():
    res = fit(np.ones((10, 1)), np.array([1, 0] * 5))
    assert res.converged
    assert res.coefficients[0] == pytest.approx(0.0, abs=1e-10)


def test_symmetric_pairs_zero_slope():
    x = np.array([-2.0, -1.0, 0.5, 3.0])
    X = np.column_stack([np.ones(8), np.repeat(x, 2)])
    y = np.tile([1, 0], 4)
    res = fit(X, y)
    assert np.allclose(res.coefficients, 0.0, atol=1e-8)


def test_matches_statsmodels():
    rng = np.random.default_rng(42)
    X = np.column_stack([np.ones(200), rng.normal(size=(200, 3))])
    y = (rng.random(200) < logistic(X @ np.array([0.2, 1.0, -0.5, 0.0]))).astype(int)
    ours = fit(X, y)
    ref = sm.Logit(y, X).fit(disp=0, tol=1e-12)
    assert ours.converged and ours.iterations < 50
    assert np.allclose(ours.coefficients, ref.params, atol=1e-7)
    assert ours.final_loglik == pytest.approx(ref.llf, abs=1e-8)


def test_rank_deficiency_names_columns():
    rng = np.random.default_rng(1)
    a = rng.normal(size=20)
    dm = DesignMatrix(["intercept", "s_AAPL", "s_dup"], np.column_stack([np.ones(20), a, 2 * a]),
                      (a > 0).astype(int))
    with pytest.raises(RankDeficiencyError) as err:
        fit(dm)
    assert err.value.columns == ["s_dup"]


def test_all_zero_column_is_rank_deficient():
    X = np.column_stack([np.ones(6), np.zeros(6)])
    with pytest.raises(RankDeficiencyError):
        fit(X, [1, 0, 1, 0, 1, 1])


def test_separation_flagged():
    x = np.arange(-5.0, 5.0)
    X = np.column_stack([np.ones(10), x])
    res = fit(X, (x > 0).astype(int))
    assert res.separation
    assert res.warnings
    assert np.all(np.abs(res.coefficients) <= 30)
    assert np.all((res.fitted_probs >= 1e-12) & (res.fitted_probs <= 1 - 1e-12))


def test_label_length_mismatch():
    with pytest.raises(ShapeError):
        fit(np.ones((4, 1)), [1, 0, 1])


def test_predict_rules():
    zero = FitResult(np.zeros(2), True, 1, 0.0, np.array([]), ["intercept", "s"])
    assert list(predict(zero, np.ones((3, 2)))) == [0, 0, 0]
    one = FitResult(np.array([0.0, 1.0]), True, 1, 0.0, np.array([]), ["intercept", "s"])
    assert predict_proba(one, [[1.0, 1.0]])[0] == pytest.approx(0.731, abs=1e-3)
    assert list(predict(one, [[1.0, 1.0], [1.0, 500.0]])) == [1, 1]


def test_predict_layout_mismatch():
    res = FitResult(np.zeros(2), True, 1, 0.0, np.array([]), ["intercept", "s_AAPL"])
    with pytest.raises(ShapeError):
        predict(res, DesignMatrix(["intercept", "s_TSLA"], np.ones((2, 2)), np.zeros(2)))
    with pytest.raises(ShapeError):
        predict(res, np.ones((2, 3)))


def test_fit_result_json():
    res = fit(np.ones((4, 1)), [1, 1, 1, 0])
    assert '"x0"' in res.to_json()


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000))
def test_score_is_gradient(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(15, 3))
    y = rng.integers(0, 2, 15)
    beta = rng.normal(size=3)
    h = 1e-5
    num = np.array([(loglik(beta + h * e, X, y) - loglik(beta - h * e, X, y)) / (2 * h) for e in np.eye(3)])
    assert np.allclose(score(beta, X, y), num, rtol=1e-6, atol=1e-7)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 1), min_size=5, max_size=60).filter(lambda v: 0 < sum(v) < len(v)))
def test_intercept_is_logit_mean(labels):
    y = np.array(labels)
    m = y.mean()
    res = fit(np.ones((y.size, 1)), y)
    assert res.coefficients[0] == pytest.approx(math.log(m / (1 - m)), abs=1e-8)

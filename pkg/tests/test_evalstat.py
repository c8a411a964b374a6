import csv
import math

import numpy as np
import pytest
from scipy.stats import binomtest, chi2

from stocksent.errors import PlanError, ShapeError
from stocksent.evalstat import (SplitPlan, accuracy, canonical_plans, chi2_1_sf, emit_report, mcnemar,
                                mcnemar_from_counts, naive_predict, render_table, run_splits)
from stocksent.featurize import DailyFeatures
from stocksent.ingest import MovementLabel
from stocksent.synthetic import study_calendar

DAYS = study_calendar(2017)[1:]


def test_naive():
    assert list(naive_predict(np.zeros((378, 7)))) == [1] * 378
    assert naive_predict([]).size == 0


def test_accuracy_examples():
    truth = np.array([1] * 196 + [0] * 182)
    assert accuracy(np.ones(378), truth) == pytest.approx(0.518519, abs=1e-6)
    assert f"{100 * accuracy(np.ones(378), truth):.2f}" == "51.85"
    assert accuracy(truth, truth) == 1.0
    assert accuracy(1 - truth, truth) == 0.0


def test_accuracy_errors():
    with pytest.raises(ShapeError):
        accuracy([1, 0], [1])
    with pytest.raises(ValueError):
        accuracy([], [])


def test_mcnemar_fixtures():
    r = mcnemar_from_counts(10, 20)
    assert r.method == "chi2_cc" and r.statistic == pytest.approx(2.7)
    assert r.p_value == pytest.approx(0.10034824646229054, abs=1e-12)
    assert mcnemar_from_counts(2, 3).p_value == 1.0
    assert mcnemar_from_counts(15, 15).p_value == 1.0
    assert mcnemar_from_counts(0, 0).p_value == 1.0


@pytest.mark.parametrize("b, c", [(0, 5), (1, 9), (3, 12), (7, 17), (0, 24)])
def test_exact_matches_scipy(b, c):
    assert mcnemar_from_counts(b, c).p_value == pytest.approx(binomtest(b, b + c, 0.5).pvalue, rel=1e-12)


@pytest.mark.parametrize("x", [0.0, 0.3, 2.7, 10.0, 60.0])
def test_chi2_tail(x):
    assert chi2_1_sf(x) == pytest.approx(chi2.sf(x, 1), rel=1e-10, abs=1e-300)


def test_mcnemar_from_predictions():
    truth = np.array([1, 1, 0, 0, 1, 0])
    a = np.array([1, 1, 0, 1, 0, 0])
    b = np.array([1, 0, 1, 0, 0, 0])
    r = mcnemar(a, b, truth)
    assert (r.b, r.c) == (2, 1)
    assert r.table == ((2, 2), (1, 1))


@pytest.mark.parametrize("start, n_train", [(4, 3), (9, 8)])
def test_canonical_plan_sizes(start, n_train):
    plan = SplitPlan(start)
    assert plan.train_months == n_train and plan.test_months == 13 - start


@pytest.mark.parametrize("start", [1, 2, 3, 11, 12, 13])
def test_plan_invariant(start):
    with pytest.raises(PlanError):
        SplitPlan(start)


def test_canonical_plans():
    assert [p.begin_test for p in canonical_plans()] == ["April", "May", "June", "July", "August", "September"]


def _inputs(seed=0, signal=True):
    rng = np.random.default_rng(seed)
    feats, bert, labels = {}, {}, {}
    for c in ("AAPL", "TSLA"):
        s = rng.normal(0, 0.6, len(DAYS))
        a = rng.poisson(10, len(DAYS))
        d = rng.poisson(8, len(DAYS))
        eta = 1.5 * s if signal else np.zeros(len(DAYS))
        up = (rng.random(len(DAYS)) < 1 / (1 + np.exp(-eta))).astype(int)
        feats[c] = [DailyFeatures(c, dy, float(s[i]), int(a[i]), int(d[i]), 40, 0.0) for i, dy in enumerate(DAYS)]
        bert[c] = [DailyFeatures(c, dy, float(s[i] + rng.normal(0, 0.5)), 0, 0, 40, 0.0) for i, dy in enumerate(DAYS)]
        labels[c] = [MovementLabel(c, dy, int(up[i])) for i, dy in enumerate(DAYS)]
    return feats, bert, labels


def test_run_splits_n_test_matches_table():
    feats, bert, labels = _inputs()
    reports = run_splits(feats, labels, canonical_plans(), bert)
    assert [r.n_test for r in reports] == [378, 340, 296, 252, 212, 166]
    assert all(r.acc_gpt > r.acc_naive for r in reports)
    assert all(not math.isnan(r.acc_bert) for r in reports)


def test_run_splits_without_bert():
    feats, _, labels = _inputs(1)
    r = run_splits(feats, labels, [SplitPlan(6)])[0]
    assert math.isnan(r.acc_bert) and math.isnan(r.p_bert_vs_naive)


def test_run_splits_deterministic(tmp_path):
    feats, bert, labels = _inputs(2)
    for sub in ("a", "b"):
        emit_report(run_splits(feats, labels, canonical_plans(), bert), feats, tmp_path / sub)
    assert (tmp_path / "a/results.csv").read_bytes() == (tmp_path / "b/results.csv").read_bytes()


def test_empty_period_is_plan_error():
    feats, _, labels = _inputs(3)
    with pytest.raises(PlanError):
        run_splits(feats, labels, [SplitPlan(6, year=2018)])


def test_emit_report_files(tmp_path):
    feats, bert, labels = _inputs(4)
    reports = run_splits(feats, labels, canonical_plans(), bert)
    written = emit_report(reports, feats, tmp_path)
    with open(written["results_csv"]) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["begin_test", "acc_naive", "acc_bert", "p_bert_naive", "acc_gpt", "p_gpt_naive", "n_test"]
    assert len(rows) == 7
    assert len(render_table(reports).splitlines()) == 8
    for m in ("avg_sentiment", "avg_advantage"):
        for c in ("AAPL", "TSLA"):
            assert (tmp_path / "eda" / f"density_{m}_{c}.csv").exists()


def test_emit_single_report(tmp_path):
    feats, bert, labels = _inputs(5)
    emit_report(run_splits(feats, labels, [SplitPlan(5)], bert), feats, tmp_path)
    assert len((tmp_path / "results.csv").read_text().splitlines()) == 2

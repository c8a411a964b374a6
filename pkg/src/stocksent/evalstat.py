"""Month-anchored train/test evaluation against a buy-and-hold baseline, with McNemar tests."""

from __future__ import annotations

import calendar
import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import glm
from .errors import PlanError, ShapeError
from .featurize import DailyFeatures, DesignMatrix, stack
from .ingest import MovementLabel

EXACT_THRESHOLD = 25
MIN_MONTHS = 3


@dataclass(frozen=True)
class SplitPlan:
    test_start: int
    year: int = 2017
    train_start: int = 1
    test_end: int = 12

    def __post_init__(self) -> None:
        if not 1 <= self.train_start < self.test_start <= self.test_end <= 12:
            raise PlanError(f"invalid month range for plan {self}")
        if self.train_months < MIN_MONTHS:
            raise PlanError(f"test beginning {self.begin_test} leaves {self.train_months} training month(s); "
                            f"need {MIN_MONTHS}")
        if self.test_months < MIN_MONTHS:
            raise PlanError(f"test beginning {self.begin_test} leaves {self.test_months} test month(s); "
                            f"need {MIN_MONTHS}")

    @property
    def train_end(self) -> int:
        return self.test_start - 1

    @property
    def train_months(self) -> int:
        return self.train_end - self.train_start + 1

    @property
    def test_months(self) -> int:
        return self.test_end - self.test_start + 1

    @property
    def begin_test(self) -> str:
        return calendar.month_name[self.test_start]

    def masks(self, dates) -> tuple[np.ndarray, np.ndarray]:
        year = np.array([d.year for d in dates])
        month = np.array([d.month for d in dates])
        in_year = year == self.year
        train = in_year & (month >= self.train_start) & (month <= self.train_end)
        test = in_year & (month >= self.test_start) & (month <= self.test_end)
        return train, test


def canonical_plans(year: int = 2017) -> list[SplitPlan]:
    """Test periods beginning April through September."""
    return [SplitPlan(m, year) for m in range(4, 10)]


def naive_predict(test_rows) -> np.ndarray:
    n = len(test_rows) if not isinstance(test_rows, int) else test_rows
    return np.ones(n, dtype=int)


def accuracy(pred, truth) -> float:
    pred, truth = np.asarray(pred), np.asarray(truth)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction shape {pred.shape} != truth shape {truth.shape}")
    if pred.size == 0:
        raise ValueError("accuracy is undefined for an empty sample")
    return float(np.mean(pred == truth))


@dataclass(frozen=True)
class McNemarResult:
    p_value: float
    b: int
    c: int
    table: tuple[tuple[int, int], tuple[int, int]]
    method: str
    statistic: float | None = None

    def to_json(self) -> dict:
        return {"p_value": self.p_value, "b": self.b, "c": self.c, "table": [list(r) for r in self.table],
                "method": self.method, "statistic": self.statistic}


def _binom_cdf_half(k: int, n: int) -> float:
    return sum(math.comb(n, i) for i in range(k + 1)) / 2**n


def chi2_1_sf(x: float) -> float:
    """Upper tail of the chi-square distribution with one degree of freedom."""
    return math.erfc(math.sqrt(max(x, 0.0) / 2.0))


def mcnemar_from_counts(b: int, c: int, both_right: int = 0, both_wrong: int = 0) -> McNemarResult:
    table = ((both_right, b), (c, both_wrong))
    n = b + c
    if n == 0:
        return McNemarResult(1.0, b, c, table, "none")
    if n < EXACT_THRESHOLD:
        p = min(1.0, 2.0 * _binom_cdf_half(min(b, c), n))
        return McNemarResult(p, b, c, table, "exact")
    stat = max(abs(b - c) - 1, 0) ** 2 / n
    return McNemarResult(chi2_1_sf(stat), b, c, table, "chi2_cc", stat)


def mcnemar(pred_a, pred_b, truth) -> McNemarResult:
    """Paired test on correctness: b = a right and b wrong, c = a wrong and b right."""
    pred_a, pred_b, truth = map(np.asarray, (pred_a, pred_b, truth))
    if not (pred_a.shape == pred_b.shape == truth.shape) or truth.size == 0:
        raise ShapeError("mcnemar needs three equal-length, non-empty vectors")
    ra, rb = pred_a == truth, pred_b == truth
    return mcnemar_from_counts(int(np.sum(ra & ~rb)), int(np.sum(~ra & rb)),
                               int(np.sum(ra & rb)), int(np.sum(~ra & ~rb)))


@dataclass
class EvalReport:
    split: SplitPlan
    acc_naive: float
    acc_bert: float
    acc_gpt: float
    p_bert_vs_naive: float
    p_gpt_vs_naive: float
    n_test: int
    contingency_tables: dict[str, McNemarResult] = field(default_factory=dict)
    fits: dict[str, glm.FitResult] = field(default_factory=dict)


def _evaluate_set(design: DesignMatrix, plan: SplitPlan, tol: float, max_iter: int):
    train, test = plan.masks(design.dates)
    if not train.any() or not test.any():
        raise PlanError(f"plan beginning {plan.begin_test} {plan.year} has an empty train or test period")
    tr, te = design.subset(train), design.subset(test)
    result = glm.fit(tr, tol=tol, max_iter=max_iter)
    return result, glm.predict(result, te), te.y


def run_splits(
    features: Mapping[str, Sequence[DailyFeatures]],
    labels: Mapping[str, Sequence[MovementLabel]],
    plans: Sequence[SplitPlan],
    bert_features: Mapping[str, Sequence[DailyFeatures]] | None = None,
    block_order: Sequence[str] | None = None,
    tol: float = glm.DEFAULT_TOL,
    max_iter: int = glm.DEFAULT_MAX_ITER,
) -> list[EvalReport]:
    """Fit the six-regressor model (and, if given, the BERT sentiment model) per plan.

    Without ``bert_features`` the BERT columns of each report are NaN.
    """
    gpt_design = stack(features, labels, "gpt", block_order)
    bert_design = stack(bert_features, labels, "bert", block_order) if bert_features is not None else None
    reports = []
    for plan in plans:
        gpt_fit, gpt_pred, truth = _evaluate_set(gpt_design, plan, tol, max_iter)
        naive = naive_predict(truth.size)
        tables = {"gpt_vs_naive": mcnemar(gpt_pred, naive, truth)}
        fits = {"gpt": gpt_fit}
        acc_bert = p_bert = math.nan
        if bert_design is not None:
            bert_fit, bert_pred, bert_truth = _evaluate_set(bert_design, plan, tol, max_iter)
            tables["bert_vs_naive"] = mcnemar(bert_pred, naive, bert_truth)
            fits["bert"] = bert_fit
            acc_bert = accuracy(bert_pred, bert_truth)
            p_bert = tables["bert_vs_naive"].p_value
        reports.append(EvalReport(
            plan, accuracy(naive, truth), acc_bert, accuracy(gpt_pred, truth), p_bert,
            tables["gpt_vs_naive"].p_value, int(truth.size), tables, fits,
        ))
    return reports


# ---- report emission --------------------------------------------------------

RESULT_HEADER = ["begin_test", "acc_naive", "acc_bert", "p_bert_naive", "acc_gpt", "p_gpt_naive", "n_test"]


def _pct(x: float) -> str:
    return "nan" if math.isnan(x) else f"{100 * x:.2f}"


def _pval(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.2e}"


def result_rows(reports: Sequence[EvalReport]) -> list[list[str]]:
    return [
        [r.split.begin_test, _pct(r.acc_naive), _pct(r.acc_bert), _pval(r.p_bert_vs_naive), _pct(r.acc_gpt),
         _pval(r.p_gpt_vs_naive), str(r.n_test)]
        for r in reports
    ]


def render_table(reports: Sequence[EvalReport]) -> str:
    head = ["Begin test", "Naive", "BERT", "p(BERT|Naive)", "GPT", "p(GPT|Naive)", "n_test"]
    rows = [[row[0], row[1] + "%", row[2] + "%", row[3], row[4] + "%", row[5], row[6]]
            for row in result_rows(reports)]
    widths = [max(len(x) for x in col) for col in zip(head, *rows)]
    fmt = lambda cells: "  ".join(c.rjust(w) for c, w in zip(cells, widths))  # noqa: E731
    lines = [fmt(head), "  ".join("-" * w for w in widths)] + [fmt(r) for r in rows]
    return "\n".join(lines) + "\n"


def _kde(values: np.ndarray, grid: np.ndarray) -> np.ndarray:
    n = values.size
    if n == 0:
        return np.zeros_like(grid)
    sd = values.std(ddof=1) if n > 1 else 0.0
    bw = 1.06 * sd * n ** (-0.2) if sd > 0 else 0.1
    z = (grid[:, None] - values[None, :]) / bw
    return np.exp(-0.5 * z**2).sum(axis=1) / (n * bw * math.sqrt(2 * math.pi))


def emit_report(
    reports: Sequence[EvalReport],
    eda: Mapping[str, Sequence[DailyFeatures]],
    outdir: str | Path,
    grid_points: int = 201,
) -> dict[str, Path]:
    """Write the results table (CSV and text), McNemar details, and EDA data files."""
    if not reports:
        raise ValueError("no reports to emit")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}

    path = out / "results.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_HEADER)
        w.writerows(result_rows(reports))
    written["results_csv"] = path

    path = out / "results.txt"
    path.write_text(render_table(reports), encoding="utf-8")
    written["results_txt"] = path

    path = out / "mcnemar.json"
    detail = [{"begin_test": r.split.begin_test, **{k: v.to_json() for k, v in r.contingency_tables.items()},
               "coefficients": {k: f.named() for k, f in r.fits.items()},
               "separation": {k: f.separation for k, f in r.fits.items()}} for r in reports]
    path.write_text(json.dumps(detail, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written["mcnemar_json"] = path

    eda_dir = out / "eda"
    eda_dir.mkdir(exist_ok=True)
    ranges = {"avg_sentiment": (-2.0, 2.0), "avg_advantage": (-1.0, 1.0)}
    for measure, (lo, hi) in ranges.items():
        grid = np.linspace(lo, hi, grid_points)
        for company, feats in eda.items():
            vals = np.array([getattr(f, measure) for f in feats if f.msg_count > 0])
            path = eda_dir / f"density_{measure}_{company}.csv"
            with open(path, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow([measure, "density"])
                w.writerows([f"{x:.4f}", f"{d:.6f}"] for x, d in zip(grid, _kde(vals, grid)))
            written[f"density_{measure}_{company}"] = path

    path = eda_dir / "scatter.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["company", "date", "avg_sentiment", "avg_advantage", "msg_count"])
        for company, feats in eda.items():
            for f in feats:
                w.writerow([company, f.date.isoformat(), f"{f.avg_sentiment:.6f}", f"{f.avg_advantage:.6f}",
                            f.msg_count])
    written["scatter"] = path

    path = eda_dir / "advantage_counts.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["company", "class", "count", "share"])
        for company, feats in eda.items():
            adv = sum(f.adv_count for f in feats)
            dis = sum(f.dis_count for f in feats)
            total = sum(f.msg_count for f in feats)
            for name, count in (("advantage", adv), ("disadvantage", dis), ("equal", total - adv - dis)):
                w.writerow([company, name, count, f"{count / total:.6f}" if total else "nan"])
    written["advantage_counts"] = path
    return written

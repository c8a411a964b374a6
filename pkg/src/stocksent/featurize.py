"""Daily aggregation of message records and the stacked two-company design matrix."""

from __future__ import annotations

import csv
from bisect import bisect_left
from dataclasses import dataclass, field
from datetime import date, datetime, time, timezone
from pathlib import Path
from typing import Iterable, Mapping, Sequence
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

import numpy as np

from .errors import AlignmentError, ConfigError
from .ingest import MovementLabel
from .respparse import SentimentRecord, Status, classify_sentiment

MARKET_TZ = "America/New_York"
MARKET_CLOSE = time(16, 0)

REGRESSOR_SETS = {"bert": ("s",), "gpt": ("s", "a", "d")}


def _zone(name: str) -> ZoneInfo:
    try:
        return ZoneInfo(name)
    except (ZoneInfoNotFoundError, ValueError) as exc:
        raise ConfigError(f"cannot resolve time zone {name!r}: {exc}") from exc


class TradingCalendar:
    """Maps UTC instants to trading days via (previous close, close] windows."""

    def __init__(self, trading_days: Sequence[date], tz: str = MARKET_TZ):
        if not trading_days:
            raise ValueError("trading_days must be non-empty")
        days = list(trading_days)
        if any(b <= a for a, b in zip(days, days[1:])):
            raise ValueError("trading_days must be strictly increasing")
        zone = _zone(tz)
        self.days = days
        self.closes = [datetime.combine(d, MARKET_CLOSE, tzinfo=zone).astimezone(timezone.utc) for d in days]

    def assign(self, ts: datetime) -> date | None:
        i = bisect_left(self.closes, ts)
        if i == 0 or i == len(self.closes):
            return None
        return self.days[i]


def window_assign(msg_ts: datetime, trading_days: Sequence[date], tz: str = MARKET_TZ) -> date | None:
    """Trading day whose window contains ``msg_ts``, or None when out of range."""
    return TradingCalendar(trading_days, tz).assign(msg_ts)


@dataclass(frozen=True)
class DailyFeatures:
    company: str
    date: date
    avg_sentiment: float
    adv_count: int
    dis_count: int
    msg_count: int
    avg_advantage: float


def aggregate_day(records: Iterable[SentimentRecord], company: str = "", day: date | None = None) -> DailyFeatures:
    """Average sentiment (baseline 0), advantage/disadvantage counts and average advantage.

    Records without advantage probabilities (sentiment-only inputs) count toward neither side.
    """
    n = adv = dis = 0
    s_sum = 0
    for rec in records:
        if rec.status is not Status.PARSED:
            raise ValueError(f"record {rec.message_id!r} is {rec.status.value}; filter before aggregating")
        n += 1
        s_sum += classify_sentiment(rec)
        if rec.advantage_probs is not None:
            p = rec.advantage_probs[0]
            if abs(p - 0.5) > 1e-9:
                if p > 0.5:
                    adv += 1
                else:
                    dis += 1
    if n == 0:
        return DailyFeatures(company, day, 0.0, 0, 0, 0, 0.0)
    return DailyFeatures(company, day, s_sum / n - 3, adv, dis, n, (adv - dis) / n)


def daily_features(
    stamped: Iterable[tuple[datetime, SentimentRecord]],
    calendar: TradingCalendar,
    dates: Sequence[date],
    company: str,
) -> list[DailyFeatures]:
    """Features for every date in ``dates``; NA and unparseable records are skipped."""
    wanted = set(dates)
    buckets: dict[date, list[SentimentRecord]] = {d: [] for d in dates}
    for ts, rec in stamped:
        if rec.status is not Status.PARSED:
            continue
        day = calendar.assign(ts)
        if day in wanted:
            buckets[day].append(rec)
    return [aggregate_day(buckets[d], company, d) for d in dates]


def write_features(features: Iterable[DailyFeatures], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["company", "date", "avg_sentiment", "adv_count", "dis_count", "msg_count", "avg_advantage"])
        for f in features:
            w.writerow([f.company, f.date.isoformat(), repr(f.avg_sentiment), f.adv_count, f.dis_count,
                        f.msg_count, repr(f.avg_advantage)])


def read_features(path: str | Path) -> list[DailyFeatures]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            DailyFeatures(r["company"], date.fromisoformat(r["date"]), float(r["avg_sentiment"]),
                          int(r["adv_count"]), int(r["dis_count"]), int(r["msg_count"]), float(r["avg_advantage"]))
            for r in csv.DictReader(fh)
        ]


@dataclass
class DesignMatrix:
    columns: list[str]
    X: np.ndarray
    y: np.ndarray
    companies: list[str] = field(default_factory=list)
    dates: list[date] = field(default_factory=list)

    def __len__(self) -> int:
        return self.X.shape[0]

    def subset(self, mask: np.ndarray) -> "DesignMatrix":
        mask = np.asarray(mask, dtype=bool)
        idx = np.flatnonzero(mask)
        return DesignMatrix(self.columns, self.X[idx], self.y[idx],
                            [self.companies[i] for i in idx], [self.dates[i] for i in idx])

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["company", "date", *self.columns, "U"])
            for i in range(len(self)):
                w.writerow([self.companies[i], self.dates[i].isoformat(), *(repr(float(v)) for v in self.X[i]),
                            int(self.y[i])])


def stack(
    features_by_company: Mapping[str, Sequence[DailyFeatures]],
    labels: Mapping[str, Sequence[MovementLabel]],
    regressor_set: str,
    block_order: Sequence[str] | None = None,
) -> DesignMatrix:
    """Pool the companies into one design with company-specific, zero-padded columns.

    Columns are ``intercept`` then, per feature, one column per company in mapping order.
    Row blocks default to the reverse of that order, so the first company's columns are
    zero over the upper block.
    """
    if regressor_set not in REGRESSOR_SETS:
        raise ValueError(f"unknown regressor set {regressor_set!r}")
    companies = list(features_by_company)
    order = list(block_order) if block_order is not None else companies[::-1]
    if sorted(order) != sorted(companies):
        raise ValueError(f"block order {order} does not match companies {companies}")
    feats = REGRESSOR_SETS[regressor_set]
    columns = ["intercept"] + [f"{f}_{c}" for f in feats for c in companies]
    col_of = {name: j for j, name in enumerate(columns)}

    rows, ys, row_companies, row_dates = [], [], [], []
    for c in order:
        fs = list(features_by_company[c])
        ls = list(labels[c])
        f_dates = [f.date for f in fs]
        l_dates = [lab.date for lab in ls]
        if f_dates != l_dates:
            missing = sorted(set(l_dates) - set(f_dates))
            extra = sorted(set(f_dates) - set(l_dates))
            raise AlignmentError(
                f"{c}: feature/label dates differ; missing features for {[d.isoformat() for d in missing[:5]]}, "
                f"no labels for {[d.isoformat() for d in extra[:5]]}"
            )
        for f, lab in zip(fs, ls):
            row = np.zeros(len(columns))
            row[0] = 1.0
            values = {"s": f.avg_sentiment, "a": f.adv_count, "d": f.dis_count}
            for feat in feats:
                row[col_of[f"{feat}_{c}"]] = values[feat]
            rows.append(row)
            ys.append(lab.up)
            row_companies.append(c)
            row_dates.append(lab.date)
    X = np.vstack(rows) if rows else np.zeros((0, len(columns)))
    return DesignMatrix(columns, X, np.asarray(ys, dtype=int), row_companies, row_dates)

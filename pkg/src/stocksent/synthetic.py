"""Synthetic two-company corpora with a known link between daily features and price moves.

The generator writes a message file, a replay cache holding the response each message
"receives", a five-class BERT probability file and a price file.  Labels are drawn from
``logistic(sentiment_weight * s_bar + count_weight * (a - d))`` computed from the generator's
own per-message draws, or from a fair coin when ``signal=False``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta, timezone
from pathlib import Path
from zoneinfo import ZoneInfo

import numpy as np

from .promptkit import CompanyContext

COMPANIES = (CompanyContext("Apple", "AAPL"), CompanyContext("Tesla", "TSLA"))

# NYSE full-day closures
HOLIDAYS = {
    2016: ["2016-01-01", "2016-01-18", "2016-02-15", "2016-03-25", "2016-05-30", "2016-07-04", "2016-09-05",
           "2016-11-24", "2016-12-26"],
    2017: ["2017-01-02", "2017-01-16", "2017-02-20", "2017-04-14", "2017-05-29", "2017-07-04", "2017-09-04",
           "2017-11-23", "2017-12-25"],
}

_WORDS = {
    1: ["dumping", "terrible quarter", "crash incoming", "selling everything", "awful guidance"],
    2: ["weak demand", "looks heavy", "taking profits", "not convinced", "soft numbers"],
    3: ["watching", "flat day", "no opinion", "holding steady", "waiting for earnings"],
    4: ["nice setup", "buying the dip", "solid product", "calls looking good", "strong volume"],
    5: ["to the moon", "blowout quarter", "huge breakout", "loving this rally", "best in class"],
}
_ADVERT = "join our trading room for free daily picks https://picks.example.com/signup"


def trading_days(year: int) -> list[date]:
    hol = HOLIDAYS.get(year)
    if hol is None:
        raise ValueError(f"no holiday table for {year}")
    days = np.arange(np.datetime64(f"{year}-01-01"), np.datetime64(f"{year + 1}-01-01"))
    open_ = np.is_busday(days, holidays=np.array(hol, dtype="datetime64[D]"))
    return [d.astype(object) for d in days[open_]]


def study_calendar(year: int = 2017) -> list[date]:
    """Trading days of ``year`` preceded by the last session of the prior year."""
    return trading_days(year - 1)[-1:] + trading_days(year)


@dataclass
class SyntheticCorpus:
    root: Path
    messages: Path
    prices: Path
    replay_cache: Path
    bert: Path
    config: Path
    truth: dict


def _response_text(sent_class: int, pa: int, rel: tuple[int, int, int], company: str) -> str:
    probs = [1] * 5
    probs[sent_class - 1] = 6
    s = ", ".join(f"'{k}': {v / 10}" for k, v in zip(("1(neg)", "2", "3", "4", "5(pos)"), probs))
    return (f"[Sentiment: {s}, Advantage: 'Advantage': {pa / 10}, 'Disadvantage': {(10 - pa) / 10}, "
            f"Relation: 'Mostly {company}': {rel[0] / 10}, 'Mostly competitor': {rel[1] / 10}, "
            f"'Unrelated': {rel[2] / 10}]")


_RELATIONS = ((8, 1, 1), (7, 2, 1), (6, 2, 2))


def generate(
    outdir: str | Path,
    seed: int,
    signal: bool = True,
    msgs_per_day: int = 50,
    year: int = 2017,
    na_fraction: float = 0.175,
    sentiment_weight: float = 0.8,
    count_weight: float = 0.05,
    mood_scale: float = 0.8,
    companies: tuple[CompanyContext, ...] = COMPANIES,
) -> SyntheticCorpus:
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    ny = ZoneInfo("America/New_York")
    days = study_calendar(year)
    closes = [datetime.combine(d, time(16), tzinfo=ny).astimezone(timezone.utc) for d in days]

    msg_lines, cache_lines, bert_lines, price_lines = [], [], ["message_id,p1,p2,p3,p4,p5"], []
    price_lines.append("company,date,adjusted_close")
    truth: dict = {}
    serial = 0
    for ctx in companies:
        t = ctx.ticker_symbol
        # advertisement first seen before the study window, repeated inside it
        first_ad = closes[0] - timedelta(days=200)
        ad_times = [first_ad] + [closes[i] - timedelta(hours=3) for i in range(1, len(days), 20)]
        for ts in ad_times:
            serial += 1
            mid = f"{t}-{serial:07d}"
            msg_lines.append(json.dumps({"id": mid, "timestamp_utc": ts.isoformat(), "ticker": t,
                                         "body": f"${t} {_ADVERT.upper()}"}))
            cache_lines.append(json.dumps({"message_id": mid, "response": {"text": "NA"}, "cost": 0.01}))
            bert_lines.append(f"{mid},0.2,0.2,0.2,0.2,0.2")

        price = 100.0
        price_lines.append(f"{t},{days[0].isoformat()},{price!r}")
        day_stats = []
        for i in range(1, len(days)):
            mood = rng.normal(0.0, mood_scale)
            n = int(rng.poisson(msgs_per_day))
            span = int((closes[i] - closes[i - 1]).total_seconds())
            offsets = np.sort(rng.integers(1, span + 1, size=n))
            cls = np.clip(np.rint(3 + 2 * np.tanh(mood) + rng.normal(0, 0.9, n)), 1, 5).astype(int)
            q = 1 / (1 + np.exp(-2 * mood))
            adv = np.where(rng.random(n) < 0.2, 0, np.where(rng.random(n) < q, 1, -1))
            pa = np.where(adv > 0, rng.integers(7, 10, n), np.where(adv < 0, rng.integers(1, 4, n), 5))
            rel = rng.integers(0, 3, n)
            phrase = rng.integers(0, 5, n)
            na = rng.random(n) < na_fraction
            bcls = np.clip(np.rint(3 + 1.2 * np.tanh(mood) + rng.normal(0, 1.3, n)), 1, 5).astype(int)
            for j, off in enumerate(offsets):
                serial += 1
                mid = f"{t}-{serial:07d}"
                ts = closes[i - 1] + timedelta(seconds=int(off))
                tail = "LONG" if adv[j] > 0 else "short" if adv[j] < 0 else "hmm"
                body = f"${t} {_WORDS[cls[j]][phrase[j]]} #{serial} {tail}"
                msg_lines.append(json.dumps({"id": mid, "timestamp_utc": ts.isoformat(), "ticker": t, "body": body}))
                text = "NA" if na[j] else _response_text(cls[j], pa[j], _RELATIONS[rel[j]], ctx.display_name)
                cache_lines.append(json.dumps({"message_id": mid, "response": {"text": text}, "cost": 0.01}))
                bp = ["0.10"] * 5
                bp[bcls[j] - 1] = "0.60"
                bert_lines.append(mid + "," + ",".join(bp))
            ok = ~na
            cnt = int(ok.sum())
            s_sum = int(cls[ok].sum())
            a = int((adv[ok] > 0).sum())
            d = int((adv[ok] < 0).sum())
            s_bar = s_sum / cnt - 3 if cnt else 0.0
            eta = sentiment_weight * s_bar + count_weight * (a - d)
            p_up = 1 / (1 + np.exp(-eta)) if signal else 0.5
            up = rng.random() < p_up
            ret = abs(rng.normal(0.0, 0.012)) + 1e-4
            price = round(price * (1 + ret if up else 1 - ret), 6)
            price_lines.append(f"{t},{days[i].isoformat()},{price!r}")
            day_stats.append({"date": days[i].isoformat(), "s_bar": s_bar, "a": a, "d": d, "n": cnt, "up": int(up)})
        truth[t] = day_stats

    paths = {
        "messages": out / "messages.jsonl",
        "prices": out / "prices.csv",
        "replay_cache": out / "replay_cache.jsonl",
        "bert": out / "bert_sentiments.csv",
    }
    paths["messages"].write_text("\n".join(msg_lines) + "\n", encoding="utf-8")
    paths["prices"].write_text("\n".join(price_lines) + "\n", encoding="utf-8")
    paths["replay_cache"].write_text("\n".join(cache_lines) + "\n", encoding="utf-8")
    paths["bert"].write_text("\n".join(bert_lines) + "\n", encoding="utf-8")
    config = out / "config.toml"
    company_blocks = "\n".join(
        f'[[companies]]\ndisplay_name = "{c.display_name}"\nticker = "{c.ticker_symbol}"\n' for c in companies
    )
    config.write_text(
        f"seed = {seed}\n\n"
        f"{company_blocks}\n"
        "[paths]\n"
        'messages = "messages.jsonl"\n'
        'prices = "prices.csv"\n'
        'bert_sentiments = "bert_sentiments.csv"\n'
        'output = "out"\n\n'
        "[provider]\n"
        'kind = "replay"\n'
        'cache_path = "replay_cache.jsonl"\n\n'
        "[evaluation]\n"
        f"year = {year}\n"
        "test_starts = [4, 5, 6, 7, 8, 9]\n",
        encoding="utf-8",
    )
    return SyntheticCorpus(out, paths["messages"], paths["prices"], paths["replay_cache"], paths["bert"], config,
                           truth)

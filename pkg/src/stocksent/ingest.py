"""Loading of price bars and raw messages, and derivation of up/down labels."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

from .errors import InsufficientDataError, IntegrityError, ParseError


@dataclass(frozen=True)
class PriceBar:
    company: str
    date: date
    adjusted_close: float


@dataclass(frozen=True)
class MovementLabel:
    company: str
    date: date
    up: int


@dataclass(frozen=True)
class RawMessage:
    id: str
    timestamp_utc: datetime
    ticker: str
    body: str


PRICE_FIELDS = ("company", "date", "adjusted_close")
MESSAGE_FIELDS = ("id", "timestamp_utc", "ticker", "body")


def _infer_format(path: Path, fmt: str | None) -> str:
    if fmt is None:
        fmt = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    if fmt not in ("csv", "jsonl"):
        raise ValueError(f"unsupported format {fmt!r}")
    return fmt


def _read_rows(path: Path, fmt: str) -> Iterator[tuple[int, dict]]:
    """Yield (1-based row number, mapping) from a CSV or JSONL file."""
    with open(path, newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            # header is row 1
            for i, row in enumerate(csv.DictReader(fh), start=2):
                yield i, row
        else:
            for i, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    obj = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON ({exc.msg})", row=i) from None
                if not isinstance(obj, dict):
                    raise ParseError("expected a JSON object", row=i)
                yield i, obj


def parse_timestamp(value: str) -> datetime:
    """Parse an ISO-8601 instant with explicit offset (or a trailing ``UTC``) into UTC."""
    text = value.strip()
    if text.endswith(" UTC"):
        text = text[:-4] + "+00:00"
    elif text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        raise ValueError(f"timestamp without UTC offset: {value!r}")
    return ts.astimezone(timezone.utc)


def format_timestamp(ts: datetime) -> str:
    return ts.astimezone(timezone.utc).isoformat()


def _check_price_invariants(bars: list[PriceBar]) -> list[PriceBar]:
    bars.sort(key=lambda b: (b.company, b.date))
    for prev, cur in zip(bars, bars[1:]):
        if prev.company == cur.company and prev.date == cur.date:
            raise IntegrityError(f"duplicate price bar for ({cur.company}, {cur.date.isoformat()})")
    return bars


def load_prices(path: str | Path, format: str | None = None) -> list[PriceBar]:
    path = Path(path)
    fmt = _infer_format(path, format)
    bars = []
    for row_no, row in _read_rows(path, fmt):
        try:
            company = str(row["company"]).strip()
            day = date.fromisoformat(str(row["date"]).strip())
            close = float(str(row["adjusted_close"]).strip())
        except KeyError as exc:
            raise ParseError(f"missing field {exc.args[0]!r}", row=row_no) from None
        except (TypeError, ValueError) as exc:
            raise ParseError(str(exc), row=row_no) from None
        if not company:
            raise ParseError("empty company", row=row_no)
        if not close > 0:
            raise ParseError(f"adjusted_close must be positive, got {close}", row=row_no)
        bars.append(PriceBar(company, day, close))
    return _check_price_invariants(bars)


def write_prices(bars: Iterable[PriceBar], path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, format)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(PRICE_FIELDS)
            for b in bars:
                writer.writerow([b.company, b.date.isoformat(), repr(b.adjusted_close)])
        else:
            for b in bars:
                rec = {"company": b.company, "date": b.date.isoformat(), "adjusted_close": b.adjusted_close}
                fh.write(json.dumps(rec) + "\n")


def prices_by_company(bars: Iterable[PriceBar]) -> dict[str, list[PriceBar]]:
    out: dict[str, list[PriceBar]] = {}
    for b in bars:
        out.setdefault(b.company, []).append(b)
    for series in out.values():
        series.sort(key=lambda b: b.date)
    return out


def derive_labels(prices: list[PriceBar]) -> list[MovementLabel]:
    """Label each bar after the first: up=1 iff its close strictly exceeds the previous close."""
    if len(prices) < 2:
        raise InsufficientDataError(f"need at least 2 price bars, got {len(prices)}")
    return [
        MovementLabel(cur.company, cur.date, int(cur.adjusted_close > prev.adjusted_close))
        for prev, cur in zip(prices, prices[1:])
    ]


def load_messages(path: str | Path, format: str | None = None) -> list[RawMessage]:
    path = Path(path)
    fmt = _infer_format(path, format)
    messages = []
    seen: set[str] = set()
    for row_no, row in _read_rows(path, fmt):
        ts_raw = row.get("timestamp_utc")
        body = row.get("body")
        if ts_raw in (None, ""):
            raise ParseError("missing timestamp_utc", row=row_no)
        if body is None or body == "":
            raise ParseError("missing body", row=row_no)
        msg_id = row.get("id")
        if msg_id in (None, ""):
            raise ParseError("missing id", row=row_no)
        msg_id = str(msg_id)
        try:
            ts = parse_timestamp(str(ts_raw))
        except ValueError as exc:
            raise ParseError(str(exc), row=row_no) from None
        if msg_id in seen:
            raise IntegrityError(f"duplicate message id {msg_id!r} (row {row_no})")
        seen.add(msg_id)
        messages.append(RawMessage(msg_id, ts, str(row.get("ticker", "")).strip(), str(body)))
    messages.sort(key=lambda m: (m.timestamp_utc, m.id))
    return messages


def write_messages(messages: Iterable[RawMessage], path: str | Path, format: str | None = None) -> None:
    path = Path(path)
    fmt = _infer_format(path, format)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if fmt == "csv":
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(MESSAGE_FIELDS)
            for m in messages:
                writer.writerow([m.id, format_timestamp(m.timestamp_utc), m.ticker, m.body])
        else:
            for m in messages:
                rec = {"id": m.id, "timestamp_utc": format_timestamp(m.timestamp_utc),
                       "ticker": m.ticker, "body": m.body}
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")

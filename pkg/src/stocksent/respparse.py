"""Parsing of bracketed probability responses into sentiment records."""

from __future__ import annotations

import enum
import json
import re
from functools import lru_cache
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

from .errors import NotScorableError

SUM_TOLERANCE = 0.03
EQUAL_TOLERANCE = 1e-9


class Status(str, enum.Enum):
    PARSED = "parsed"
    NA = "na"
    UNPARSEABLE = "unparseable"


class AdvantageClass(str, enum.Enum):
    ADVANTAGE = "advantage"
    DISADVANTAGE = "disadvantage"
    EQUAL = "equal"


@dataclass(frozen=True)
class SentimentRecord:
    message_id: str
    status: Status
    sentiment_probs: tuple[float, ...] | None = None
    advantage_probs: tuple[float, float] | None = None
    relation_probs: tuple[float, float, float] | None = None

    @property
    def p_advantage(self) -> float:
        if self.advantage_probs is None:
            raise NotScorableError(f"record {self.message_id!r} has status {self.status.value}")
        return self.advantage_probs[0]


_HEADER_RE = re.compile(r"(?<![\w'\"])(sentiment|advantage|relation)(?![\w'\"])\s*:", re.IGNORECASE)
_PAIR_RE = re.compile(
    r"""(['"])(.*?)\1\s*:\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"""
)
_RESIDUE_RE = re.compile(r"[\s,;{}\[\]()]*")


def _sentiment_slot(key: str) -> int | None:
    k = key.replace(" ", "")
    for i, label in enumerate(("1(neg)", "2", "3", "4", "5(pos)")):
        if k == label or k == str(i + 1):
            return i
    return None


def _advantage_slot(key: str) -> int | None:
    return {"advantage": 0, "disadvantage": 1}.get(key)


def _relation_slot(key: str) -> int | None:
    if key == "unrelated":
        return 2
    if key == "mostly competitor":
        return 1
    if key.startswith("mostly "):
        return 0
    return None


_SLOTS = {"sentiment": (_sentiment_slot, 5), "advantage": (_advantage_slot, 2), "relation": (_relation_slot, 3)}


def _parse_block(text: str, kind: str) -> tuple[float, ...] | None:
    slot_of, size = _SLOTS[kind]
    values: list[float | None] = [None] * size
    pos = 0
    for m in _PAIR_RE.finditer(text):
        if not _RESIDUE_RE.fullmatch(text[pos:m.start()]):
            return None
        pos = m.end()
        idx = slot_of(" ".join(m.group(2).lower().split()))
        if idx is None or values[idx] is not None:
            return None
        values[idx] = float(m.group(3))
    if not _RESIDUE_RE.fullmatch(text[pos:]) or any(v is None for v in values):
        return None
    if any(not 0.0 <= v <= 1.0 for v in values):
        return None
    total = sum(values)
    if abs(total - 1.0) > SUM_TOLERANCE:
        return None
    if abs(total - 1.0) > 1e-9:
        values = [v / total for v in values]
    return tuple(values)


def parse_sentiment_block(text: str) -> tuple[float, ...] | None:
    """Parse a bare five-class listing such as ``'1(neg)': 0.2, '2': 0.2, ...``."""
    return _parse_block(text, "sentiment")


@lru_cache(maxsize=4096)
def _parse_cached(text: str) -> tuple:
    stripped = text.strip()
    if stripped.strip("\"'").strip().upper() == "NA":
        return (Status.NA,)
    if not (stripped.startswith("[") and stripped.endswith("]")):
        return (Status.UNPARSEABLE,)
    inner = stripped[1:-1]
    headers = list(_HEADER_RE.finditer(inner))
    kinds = [h.group(1).lower() for h in headers]
    if kinds != ["sentiment", "advantage", "relation"] or inner[: headers[0].start()].strip():
        return (Status.UNPARSEABLE,)
    blocks = []
    for h, nxt in zip(headers, headers[1:] + [None]):
        end = nxt.start() if nxt is not None else len(inner)
        blocks.append(_parse_block(inner[h.end():end], h.group(1).lower()))
    if any(b is None for b in blocks):
        return (Status.UNPARSEABLE,)
    return (Status.PARSED, *blocks)


def parse_text(message_id: str, text: str) -> SentimentRecord:
    """Classify ``text`` as parsed, NA or unparseable; never raises."""
    return SentimentRecord(message_id, *_parse_cached(text))


def parse_response(resp) -> SentimentRecord:
    """Parse a RawResponse; failed requests (no text) become unparseable."""
    if not resp.text:
        return SentimentRecord(resp.message_id, Status.UNPARSEABLE)
    return parse_text(resp.message_id, resp.text)


def format_record(rec: SentimentRecord, display_name: str = "Company") -> str:
    """Render a parsed record in the canonical bracket layout."""
    if rec.status is not Status.PARSED:
        return "NA"
    s = ", ".join(f"'{k}': {v!r}" for k, v in zip(("1(neg)", "2", "3", "4", "5(pos)"), rec.sentiment_probs))
    a = ", ".join(f"'{k}': {v!r}" for k, v in zip(("Advantage", "Disadvantage"), rec.advantage_probs))
    r = ", ".join(
        f"'{k}': {v!r}"
        for k, v in zip((f"Mostly {display_name}", "Mostly competitor", "Unrelated"), rec.relation_probs)
    )
    return f"[Sentiment: {s}, Advantage: {a}, Relation: {r}]"


def classify_sentiment(rec: SentimentRecord) -> int:
    """Sentiment class 1..5 by argmax; ties go to the lower class."""
    if rec.status is not Status.PARSED:
        raise NotScorableError(f"record {rec.message_id!r} has status {rec.status.value}")
    probs = rec.sentiment_probs
    return max(range(5), key=lambda j: (probs[j], -j)) + 1


def classify_advantage(rec: SentimentRecord) -> AdvantageClass:
    if rec.status is not Status.PARSED:
        raise NotScorableError(f"record {rec.message_id!r} has status {rec.status.value}")
    p = rec.advantage_probs[0]
    if abs(p - 0.5) <= EQUAL_TOLERANCE:
        return AdvantageClass.EQUAL
    return AdvantageClass.ADVANTAGE if p > 0.5 else AdvantageClass.DISADVANTAGE


_PROB_KEYS = ("p_s1", "p_s2", "p_s3", "p_s4", "p_s5", "p_adv", "p_dis", "p_rel_company", "p_rel_competitor",
              "p_rel_unrelated")


def record_to_json(rec: SentimentRecord) -> dict:
    out: dict = {"message_id": rec.message_id, "status": rec.status.value}
    if rec.status is Status.PARSED:
        values = rec.sentiment_probs + rec.advantage_probs + rec.relation_probs
    else:
        values = (None,) * len(_PROB_KEYS)
    out.update(zip(_PROB_KEYS, values))
    return out


def record_from_json(obj: dict) -> SentimentRecord:
    status = Status(obj["status"])
    if status is not Status.PARSED:
        return SentimentRecord(obj["message_id"], status)
    v = [float(obj[k]) for k in _PROB_KEYS]
    return SentimentRecord(obj["message_id"], status, tuple(v[:5]), tuple(v[5:7]), tuple(v[7:]))


def write_records(records: Iterable[SentimentRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(record_to_json(rec)) + "\n")


def read_records(path: str | Path) -> list[SentimentRecord]:
    with open(path, encoding="utf-8") as fh:
        return [record_from_json(json.loads(line)) for line in fh if line.strip()]

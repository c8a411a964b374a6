"""Message cleaning for the LLM and BERT inputs, plus full-history duplicate removal.

Both profiles are ordered lists of rewrite rules.  The BERT profile runs every
LLM rule first and then strips tags, symbols, numbers and punctuation.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Callable, Iterable

from .ingest import RawMessage

LLM_PROFILE = "llm_profile"
BERT_PROFILE = "bert_profile"

_IMAGE_RE = re.compile(r"!\[[^\]]*\]\([^)]*\)|<img\b[^>]*>", re.IGNORECASE)
_URL_RE = re.compile(r"(?:[a-z][a-z0-9+.-]*://|www\.)\S*", re.IGNORECASE)
_HASHTAG_RE = re.compile(r"#\S*")
_CASHTAG_RE = re.compile(r"\$\S*")
_MENTION_RE = re.compile(r"@\S*")
_NON_ASCII_RE = re.compile(r"[^\x00-\x7f]+")
_NUMBER_RE = re.compile(r"[+-]?\d+(?:[.,:/-]\d+)*%?")
_SPECIAL_RE = re.compile(r"[^a-z ]+")
_SPACE_RE = re.compile(r"\s+")


def _sub(pattern: re.Pattern) -> Callable[[str], str]:
    return lambda text: pattern.sub(" ", text)


def _squeeze(text: str) -> str:
    return _SPACE_RE.sub(" ", text).strip()


RULES: dict[str, Callable[[str], str]] = {
    "remove_images": _sub(_IMAGE_RE),
    "remove_urls": _sub(_URL_RE),
    "lowercase": str.lower,
    "collapse_whitespace": _squeeze,
    "remove_hashtags": _sub(_HASHTAG_RE),
    "remove_cashtags": _sub(_CASHTAG_RE),
    "remove_mentions": _sub(_MENTION_RE),
    "remove_non_ascii": _sub(_NON_ASCII_RE),
    "remove_numbers": _sub(_NUMBER_RE),
    "remove_special_chars": _sub(_SPECIAL_RE),
}


@dataclass(frozen=True)
class CleaningProfile:
    name: str
    rules: tuple[str, ...]


_LLM_RULES = ("remove_images", "remove_urls", "lowercase", "collapse_whitespace")
PROFILES = {
    LLM_PROFILE: CleaningProfile(LLM_PROFILE, _LLM_RULES),
    BERT_PROFILE: CleaningProfile(
        BERT_PROFILE,
        _LLM_RULES[:-1]
        + (
            "remove_hashtags",
            "remove_cashtags",
            "remove_mentions",
            "remove_non_ascii",
            "remove_numbers",
            "remove_special_chars",
            "collapse_whitespace",
        ),
    ),
}


@dataclass(frozen=True)
class CleanedMessage:
    id: str
    timestamp_utc: datetime
    ticker: str
    body: str
    profile: str


class Dropped(enum.Enum):
    DUPLICATE = "duplicate"
    EMPTY = "empty_after_clean"


def apply_profile(text: str, profile: str | CleaningProfile) -> tuple[str, list[str]]:
    """Run a profile's rules over ``text``; return the result and the rules that changed it."""
    if isinstance(profile, str):
        profile = PROFILES[profile]
    hits = []
    for rule in profile.rules:
        new = RULES[rule](text)
        if new != text:
            hits.append(rule)
        text = new
    return text, hits


def clean_text(text: str, profile: str) -> str:
    return apply_profile(text, profile)[0]


class DuplicateRegistry:
    """First occurrence of every LLM-cleaned body, per ticker stream.

    Built once over the full message history and read-only afterwards.
    """

    def __init__(self) -> None:
        self._first: dict[tuple[str, str], tuple[datetime, str]] = {}

    def __len__(self) -> int:
        return len(self._first)

    def _register(self, msg: RawMessage) -> None:
        key = (msg.ticker, clean_text(msg.body, LLM_PROFILE))
        self._first.setdefault(key, (msg.timestamp_utc, msg.id))

    def first_occurrence(self, ticker: str, cleaned_body: str) -> tuple[datetime, str] | None:
        return self._first.get((ticker, cleaned_body))

    def is_duplicate(self, msg: RawMessage, cleaned_body: str | None = None) -> bool:
        if cleaned_body is None:
            cleaned_body = clean_text(msg.body, LLM_PROFILE)
        first = self._first.get((msg.ticker, cleaned_body))
        return first is not None and first[1] != msg.id


def dedup_registry_build(history: Iterable[RawMessage]) -> DuplicateRegistry:
    registry = DuplicateRegistry()
    for msg in sorted(history, key=lambda m: (m.timestamp_utc, m.id)):
        registry._register(msg)
    return registry


def _clean(msg: RawMessage, seen: DuplicateRegistry | None, profile: str) -> tuple[CleanedMessage | Dropped, list[str]]:
    if not msg.body:
        raise ValueError(f"message {msg.id!r} has an empty body")
    llm_body, hits = apply_profile(msg.body, LLM_PROFILE)
    if profile == LLM_PROFILE:
        body = llm_body
    else:
        body, hits = apply_profile(msg.body, profile)
    if seen is not None and seen.is_duplicate(msg, llm_body):
        return Dropped.DUPLICATE, hits
    if not body:
        return Dropped.EMPTY, hits
    return CleanedMessage(msg.id, msg.timestamp_utc, msg.ticker, body, profile), hits


def clean_llm(msg: RawMessage, seen: DuplicateRegistry | None = None) -> CleanedMessage | Dropped:
    """Strip images and URLs, lowercase; Dropped.DUPLICATE if ``seen`` saw this body earlier."""
    return _clean(msg, seen, LLM_PROFILE)[0]


def clean_bert(msg: RawMessage, seen: DuplicateRegistry | None = None) -> CleanedMessage | Dropped:
    return _clean(msg, seen, BERT_PROFILE)[0]


def clean_corpus(
    messages: Iterable[RawMessage], profile: str, seen: DuplicateRegistry | None = None
) -> tuple[list[CleanedMessage], list[dict]]:
    """Clean a corpus under one profile; also return one audit row per input message."""
    kept, audit = [], []
    for msg in messages:
        result, hits = _clean(msg, seen, profile)
        dropped = result.value if isinstance(result, Dropped) else None
        audit.append({"id": msg.id, "profile": profile, "rule_hits": hits, "dropped": dropped})
        if dropped is None:
            kept.append(result)
    return kept, audit


def write_cleaned(messages: Iterable[CleanedMessage], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for m in messages:
            rec = {"id": m.id, "timestamp_utc": m.timestamp_utc.isoformat(), "ticker": m.ticker,
                   "body": m.body, "profile": m.profile}
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def read_cleaned(path: str | Path) -> list[CleanedMessage]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                r = json.loads(line)
                out.append(CleanedMessage(r["id"], datetime.fromisoformat(r["timestamp_utc"]),
                                          r["ticker"], r["body"], r["profile"]))
    return out


def write_audit(rows: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")

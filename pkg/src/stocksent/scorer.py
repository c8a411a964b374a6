"""Scoring providers: remote chat completions, a seeded mock, a replay cache, and external BERT files.

``score_batch`` returns exactly one ``RawResponse`` per prompt, in input order.  A request
that still fails after ``retry_limit`` retries becomes a failure record (``text is None``).
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import os
import random
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence

import httpx

from .errors import AuthenticationError, ConfigError, IntegrityError, ParseError, ProviderError
from .promptkit import PromptBundle, prompt_token_estimate

log = logging.getLogger(__name__)

MOCK_COST_PER_PROMPT = 0.01
DEFAULT_NA_FRACTION = 0.175
KINDS = ("remote_chat", "mock", "replay", "external_file")


@dataclass
class ProviderConfig:
    kind: str = "mock"
    endpoint_url: str | None = None
    api_key_env: str | None = None
    model_id: str = "gpt-4"
    max_concurrency: int = 1
    retry_limit: int = 3
    request_timeout: float = 60.0
    seed: int = 0
    na_fraction: float = DEFAULT_NA_FRACTION
    cost_per_prompt: float = MOCK_COST_PER_PROMPT
    # USD per 1k tokens, only used by remote_chat
    prompt_price_per_1k: float = 0.03
    completion_price_per_1k: float = 0.06
    cache_path: str | None = None
    external_path: str | None = None
    backoff_base: float = 1.0
    backoff_factor: float = 2.0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown provider kind {self.kind!r}")
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")
        if self.retry_limit < 0:
            raise ConfigError("retry_limit must be >= 0")
        if self.kind == "remote_chat" and not (self.endpoint_url and self.api_key_env):
            raise ConfigError("remote_chat requires endpoint_url and api_key_env")
        if not 0.0 <= self.na_fraction <= 1.0:
            raise ConfigError("na_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class RawResponse:
    message_id: str
    text: str | None
    latency: float
    cost_estimate: float
    attempt_count: int
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.text is not None


@dataclass
class CostLedger:
    total: float = 0.0
    requests: int = 0
    failures: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, resp: RawResponse) -> None:
        with self._lock:
            self.total += resp.cost_estimate
            self.requests += 1
            self.failures += not resp.ok


class TransientError(ProviderError):
    """Retryable transport failure."""


def fenced_body(bundle: PromptBundle) -> str:
    text = bundle.user_text
    start = text.rfind("```", 0, len(text) - 3)
    if start < 0 or not text.endswith("```"):
        return text
    return text[start + 3:-3]


# ---- mock -------------------------------------------------------------------

def _canned_table(seed: int, size: int = 64) -> list[str]:
    rng = random.Random(f"canned:{seed}")
    table = []
    for _ in range(size):
        sent = _tenths(rng, 5)
        if rng.random() < 0.2:
            adv = (5, 5)
        else:
            a = rng.randint(0, 10)
            adv = (a, 10 - a)
        rel = _tenths(rng, 3)
        s = ", ".join(f"'{k}': {v / 10}" for k, v in zip(("1(neg)", "2", "3", "4", "5(pos)"), sent))
        table.append(
            f"[Sentiment: {s}, Advantage: 'Advantage': {adv[0] / 10}, 'Disadvantage': {adv[1] / 10}, "
            f"Relation: 'Mostly {{company}}': {rel[0] / 10}, 'Mostly competitor': {rel[1] / 10}, "
            f"'Unrelated': {rel[2] / 10}]"
        )
    return table


def _tenths(rng: random.Random, k: int) -> list[int]:
    """Random composition of 10 into ``k`` nonnegative parts."""
    cuts = sorted(rng.randint(0, 10) for _ in range(k - 1))
    return [b - a for a, b in zip([0] + cuts, cuts + [10])]


class MockProvider:
    def __init__(self, cfg: ProviderConfig):
        self.cfg = cfg
        self.table = _canned_table(cfg.seed)

    def _company(self, bundle: PromptBundle) -> str:
        marker = "for the company "
        i = bundle.system_text.find(marker)
        if i < 0:
            return "Company"
        rest = bundle.system_text[i + len(marker):]
        return rest.split(" (")[0]

    def complete(self, bundle: PromptBundle) -> tuple[str, float]:
        digest = hashlib.sha256(f"{self.cfg.seed}\x00{fenced_body(bundle)}".encode()).digest()
        u = int.from_bytes(digest[:8], "big") / 2**64
        if u < self.cfg.na_fraction:
            return "NA", self.cfg.cost_per_prompt
        idx = int.from_bytes(digest[8:16], "big") % len(self.table)
        return self.table[idx].replace("{company}", self._company(bundle)), self.cfg.cost_per_prompt


# ---- replay -----------------------------------------------------------------

def read_cache(path: str | Path) -> dict[str, dict]:
    cache = {}
    p = Path(path)
    if not p.exists():
        return cache
    with open(p, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                entry = json.loads(line)
                cache[entry["message_id"]] = entry
    return cache


def write_cache(entries: Iterable[dict], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            fh.write(json.dumps(e, ensure_ascii=False) + "\n")


def cache_entry(bundle: PromptBundle, text: str, cost: float) -> dict:
    return {
        "message_id": bundle.message_id,
        "request": {"model": bundle.model_id, "messages": bundle.messages(), "temperature": bundle.temperature},
        "response": {"text": text},
        "cost": cost,
    }


class ReplayProvider:
    def __init__(self, cfg: ProviderConfig, cache: dict[str, dict] | None = None):
        if cache is None:
            if not cfg.cache_path:
                raise ConfigError("replay provider requires cache_path")
            cache = read_cache(cfg.cache_path)
        self.cache = cache

    def complete(self, bundle: PromptBundle) -> tuple[str, float]:
        entry = self.cache.get(bundle.message_id)
        if entry is None:
            raise LookupError(f"no cached response for message {bundle.message_id!r}")
        return entry["response"]["text"], float(entry.get("cost", 0.0))


# ---- remote -----------------------------------------------------------------

class RemoteChatProvider:
    def __init__(self, cfg: ProviderConfig, client: httpx.Client | None = None):
        key = os.environ.get(cfg.api_key_env or "", "")
        if not key:
            raise AuthenticationError(f"environment variable {cfg.api_key_env} is not set")
        self.cfg = cfg
        self.client = client or httpx.Client(timeout=cfg.request_timeout)
        self.headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}
        self.recorded: dict[str, dict] = {}
        self._lock = threading.Lock()

    def complete(self, bundle: PromptBundle) -> tuple[str, float]:
        payload = {"model": bundle.model_id, "messages": bundle.messages(), "temperature": bundle.temperature}
        try:
            resp = self.client.post(self.cfg.endpoint_url, json=payload, headers=self.headers)
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise TransientError(f"{type(exc).__name__}: {exc}") from exc
        if resp.status_code in (401, 403):
            raise AuthenticationError(f"provider rejected credentials (HTTP {resp.status_code})")
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransientError(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ProviderError(f"HTTP {resp.status_code}: {resp.text[:200]}")
        body = resp.json()
        text = body["choices"][0]["message"]["content"]
        usage = body.get("usage") or {}
        prompt_tokens = usage.get("prompt_tokens", prompt_token_estimate(bundle))
        completion_tokens = usage.get("completion_tokens", -(-len(text) // 4))
        cost = (prompt_tokens * self.cfg.prompt_price_per_1k
                + completion_tokens * self.cfg.completion_price_per_1k) / 1000
        with self._lock:
            self.recorded[bundle.message_id] = cache_entry(bundle, text, cost)
        return text, cost


def make_provider(cfg: ProviderConfig, client: httpx.Client | None = None):
    if cfg.kind == "mock":
        return MockProvider(cfg)
    if cfg.kind == "replay":
        return ReplayProvider(cfg)
    if cfg.kind == "remote_chat":
        return RemoteChatProvider(cfg, client)
    raise ConfigError("external_file providers are loaded with load_external_sentiments, not scored")


# ---- batch driver -----------------------------------------------------------

def _call_with_retry(provider, bundle: PromptBundle, cfg: ProviderConfig, sleep: Callable[[float], None],
                     rng: random.Random) -> RawResponse:
    start = time.perf_counter()
    attempts = 0
    while True:
        attempts += 1
        try:
            text, cost = provider.complete(bundle)
        except AuthenticationError:
            raise
        except TransientError as exc:
            if attempts > cfg.retry_limit:
                return RawResponse(bundle.message_id, None, time.perf_counter() - start, 0.0, attempts, str(exc))
            delay = cfg.backoff_base * cfg.backoff_factor ** (attempts - 1)
            sleep(delay * (0.5 + rng.random()))
            continue
        except (LookupError, ProviderError) as exc:
            return RawResponse(bundle.message_id, None, time.perf_counter() - start, 0.0, attempts, str(exc))
        if not text:
            return RawResponse(bundle.message_id, None, time.perf_counter() - start, cost, attempts, "empty response")
        return RawResponse(bundle.message_id, text, time.perf_counter() - start, cost, attempts)


def score_batch(
    bundles: Sequence[PromptBundle],
    cfg: ProviderConfig,
    provider=None,
    ledger: CostLedger | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> list[RawResponse]:
    """Score prompts, concurrently up to ``cfg.max_concurrency``; output order follows input order.

    Raises AuthenticationError (aborting the batch) when the provider rejects credentials.
    """
    provider = provider or make_provider(cfg)
    ledger = ledger if ledger is not None else CostLedger()
    results: list[RawResponse | None] = [None] * len(bundles)

    def run(i: int) -> None:
        resp = _call_with_retry(provider, bundles[i], cfg, sleep, random.Random(f"{cfg.seed}:{i}"))
        ledger.add(resp)
        results[i] = resp

    if cfg.max_concurrency == 1 or len(bundles) <= 1:
        for i in range(len(bundles)):
            run(i)
    else:
        abort = threading.Event()

        def guarded(i: int) -> None:
            if abort.is_set():
                return
            try:
                run(i)
            except AuthenticationError:
                abort.set()
                raise

        with ThreadPoolExecutor(max_workers=cfg.max_concurrency) as pool:
            futures = [pool.submit(guarded, i) for i in range(len(bundles))]
            for fut in futures:
                exc = fut.exception()
                if isinstance(exc, AuthenticationError):
                    for f in futures:
                        f.cancel()
                    raise exc
                if exc is not None:
                    raise exc
    return results  # type: ignore[return-value]


# ---- external BERT probabilities --------------------------------------------

@dataclass(frozen=True)
class ExternalSentimentRow:
    message_id: str
    probs: tuple[float, float, float, float, float]


def load_external_sentiments(path: str | Path, known_ids: Iterable[str] | None = None) -> list[ExternalSentimentRow]:
    """Read ``message_id,p1..p5`` rows and normalize each to sum to one."""
    known = set(known_ids) if known_ids is not None else None
    rows = []
    seen = set()
    with open(path, newline="", encoding="utf-8") as fh:
        for row_no, row in enumerate(csv.DictReader(fh), start=2):
            try:
                mid = row["message_id"]
                probs = [float(row[f"p{j}"]) for j in range(1, 6)]
            except KeyError as exc:
                raise ParseError(f"missing column {exc.args[0]!r}", row=row_no) from None
            except (TypeError, ValueError) as exc:
                raise ParseError(str(exc), row=row_no) from None
            if any(p < 0 for p in probs):
                raise ParseError(f"negative probability in {probs}", row=row_no)
            total = sum(probs)
            if total <= 0:
                raise ParseError("probabilities sum to zero", row=row_no)
            if mid in seen:
                raise IntegrityError(f"duplicate message id {mid!r} (row {row_no})")
            seen.add(mid)
            if known is not None and mid not in known:
                log.warning("external sentiment row %d references unknown message id %r", row_no, mid)
            rows.append(ExternalSentimentRow(mid, tuple(p / total for p in probs)))
    return rows

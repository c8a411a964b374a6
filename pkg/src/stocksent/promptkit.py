"""Zero-shot prompt construction for contextual sentiment scoring."""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .textprep import LLM_PROFILE, CleanedMessage

TEMPLATE_VERSION = "v1"
DEFAULT_MODEL = "gpt-4"

SENTIMENT_LABELS = ("1(neg)", "2", "3", "4", "5(pos)")
ADVANTAGE_LABELS = ("Advantage", "Disadvantage")
RELATION_TAIL = ("Mostly competitor", "Unrelated")


@dataclass(frozen=True)
class CompanyContext:
    display_name: str
    ticker_symbol: str

    def __post_init__(self) -> None:
        if not self.display_name or not self.ticker_symbol:
            raise ValueError("display_name and ticker_symbol must be non-empty")
        if self.ticker_symbol != self.ticker_symbol.upper():
            raise ValueError(f"ticker must be uppercase, got {self.ticker_symbol!r}")

    @property
    def relation_labels(self) -> tuple[str, str, str]:
        return (f"Mostly {self.display_name}",) + RELATION_TAIL


@dataclass(frozen=True)
class PromptBundle:
    message_id: str
    system_text: str
    user_text: str
    temperature: float = 0.0
    model_id: str = DEFAULT_MODEL

    def messages(self) -> list[dict[str, str]]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]


@lru_cache(maxsize=None)
def load_template(kind: str, version: str = TEMPLATE_VERSION) -> str:
    return resources.files(__package__).joinpath("templates", f"{kind}_{version}.txt").read_text(encoding="utf-8")


def _pylist(labels) -> str:
    # rendered the way a Python f-string renders a list of str
    return str(list(labels))


def build_prompt(
    message: CleanedMessage,
    ctx: CompanyContext,
    model_id: str = DEFAULT_MODEL,
    version: str = TEMPLATE_VERSION,
) -> PromptBundle:
    if message.profile != LLM_PROFILE:
        raise ValueError(f"prompts take llm_profile messages, got {message.profile!r}")
    if not message.body:
        raise ValueError(f"message {message.id!r} has an empty body")
    system = load_template("system", version).format(display_name=ctx.display_name, ticker=ctx.ticker_symbol)
    user = load_template("user", version).format(
        sentiment=_pylist(SENTIMENT_LABELS),
        advantage=_pylist(ADVANTAGE_LABELS),
        relation=_pylist(ctx.relation_labels),
        message=message.body,
    )
    return PromptBundle(message.id, system, user, 0.0, model_id)


def prompt_token_estimate(bundle: PromptBundle) -> int:
    """Rough token count, one token per four characters of prompt text."""
    return math.ceil((len(bundle.system_text) + len(bundle.user_text)) / 4)

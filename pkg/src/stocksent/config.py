"""TOML pipeline configuration."""

from __future__ import annotations

import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .evalstat import SplitPlan
from .promptkit import CompanyContext
from .scorer import ProviderConfig


@dataclass
class Paths:
    messages: Path
    prices: Path
    output: Path
    history: Path | None = None
    bert_sentiments: Path | None = None


@dataclass
class PipelineConfig:
    companies: list[CompanyContext]
    paths: Paths
    provider: ProviderConfig
    split_plans: list[SplitPlan]
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 50
    source: Path | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def __post_init__(self) -> None:
        if not self.companies:
            raise ConfigError("at least one company is required")

    @property
    def tickers(self) -> list[str]:
        return [c.ticker_symbol for c in self.companies]

    def context_for(self, ticker: str) -> CompanyContext | None:
        for c in self.companies:
            if c.ticker_symbol == ticker:
                return c
        return None


def _path(base: Path, value, key: str, required: bool = True) -> Path | None:
    if value in (None, ""):
        if required:
            raise ConfigError(f"paths.{key} is required")
        return None
    p = Path(value)
    return p if p.is_absolute() else base / p


def load_config(path: str | Path, seed: int | None = None) -> PipelineConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_dict(raw, path.parent, seed=seed, source=path)


def config_from_dict(raw: dict, base: Path, seed: int | None = None, source: Path | None = None) -> PipelineConfig:
    base = Path(base)
    try:
        companies = [CompanyContext(c["display_name"], c["ticker"]) for c in raw.get("companies", [])]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad [[companies]] entry: {exc}") from None
    p = raw.get("paths", {})
    paths = Paths(
        messages=_path(base, p.get("messages"), "messages"),
        prices=_path(base, p.get("prices"), "prices"),
        output=_path(base, p.get("output", "out"), "output"),
        history=_path(base, p.get("history"), "history", required=False),
        bert_sentiments=_path(base, p.get("bert_sentiments"), "bert_sentiments", required=False),
    )
    run_seed = int(raw.get("seed", 0)) if seed is None else seed
    prov = dict(raw.get("provider", {}))
    allowed = {f.name for f in fields(ProviderConfig)}
    unknown = set(prov) - allowed
    if unknown:
        raise ConfigError(f"unknown provider keys: {sorted(unknown)}")
    for key in ("cache_path", "external_path"):
        if prov.get(key):
            prov[key] = str(_path(base, prov[key], key))
    prov.setdefault("seed", run_seed)
    if seed is not None:
        prov["seed"] = seed
    provider = ProviderConfig(**prov)

    ev = raw.get("evaluation", {})
    year = int(ev.get("year", 2017))
    plans = [SplitPlan(int(m), year) for m in ev.get("test_starts", [4, 5, 6, 7, 8, 9])]
    return PipelineConfig(companies, paths, provider, plans, run_seed, float(ev.get("tol", 1e-8)),
                          int(ev.get("max_iter", 50)), source, raw)


def config_digest_view(cfg: PipelineConfig) -> dict:
    """Stable, JSON-friendly view of the settings that influence outputs."""
    prov = asdict(cfg.provider)
    return {
        "companies": [(c.display_name, c.ticker_symbol) for c in cfg.companies],
        "provider": prov,
        "plans": [(pl.test_start, pl.year) for pl in cfg.split_plans],
        "seed": cfg.seed,
        "tol": cfg.tol,
        "max_iter": cfg.max_iter,
    }

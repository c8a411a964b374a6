"""Stage functions behind the CLI, with a content-addressed manifest for skipping up-to-date work."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import dataclass
from datetime import date
from pathlib import Path
from typing import Callable

import numpy as np

from . import glm
from .config import PipelineConfig, config_digest_view
from .errors import InputError
from .evalstat import EvalReport, McNemarResult, SplitPlan, emit_report, run_splits
from .featurize import DailyFeatures, TradingCalendar, daily_features, read_features, stack, write_features
from .ingest import MovementLabel, RawMessage, derive_labels, load_messages, load_prices, prices_by_company
from .promptkit import build_prompt
from .respparse import SentimentRecord, Status, parse_response, read_records, write_records
from .scorer import CostLedger, RemoteChatProvider, load_external_sentiments, make_provider, score_batch, write_cache
from .textprep import (BERT_PROFILE, LLM_PROFILE, clean_corpus, dedup_registry_build, read_cleaned, write_audit,
                       write_cleaned)

log = logging.getLogger(__name__)

STAGES = ("clean", "score", "featurize", "fit", "evaluate", "report")


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class Manifest:
    def __init__(self, outdir: Path):
        self.path = outdir / "manifest.json"
        self.entries: dict = json.loads(self.path.read_text()) if self.path.exists() else {}

    def save(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self.path.write_text(json.dumps(self.entries, indent=2, sort_keys=True) + "\n")

    def up_to_date(self, stage: str, digest: str) -> bool:
        e = self.entries.get(stage)
        if not e or e.get("stale") or e.get("input_digest") != digest:
            return False
        return all(Path(p).exists() and _sha256_file(Path(p)) == d for p, d in e.get("outputs", {}).items())

    def record(self, stage: str, digest: str, outputs: list[Path]) -> None:
        self.entries[stage] = {"input_digest": digest, "stale": False,
                               "outputs": {str(p): _sha256_file(p) for p in outputs}}
        self.save()

    def mark_stale(self, stage: str) -> None:
        for name in STAGES[STAGES.index(stage):]:
            if name in self.entries:
                self.entries[name]["stale"] = True
        self.save()


def input_digest(stage: str, inputs: list[Path], settings: dict) -> str:
    h = hashlib.sha256(stage.encode())
    h.update(json.dumps(settings, sort_keys=True, default=str).encode())
    for p in inputs:
        h.update(str(p.name).encode())
        h.update(_sha256_file(p).encode())
    return h.hexdigest()


@dataclass
class Outputs:
    root: Path

    def __getattr__(self, name: str) -> Path:
        names = {
            "cleaned_llm": "cleaned_llm.jsonl",
            "cleaned_bert": "cleaned_bert.jsonl",
            "clean_audit": "clean_audit.jsonl",
            "records": "records.jsonl",
            "ledger": "score_ledger.json",
            "replay_cache": "replay_cache.jsonl",
            "features_gpt": "features_gpt.csv",
            "features_bert": "features_bert.csv",
            "labels": "labels.csv",
            "design_gpt": "design_gpt.csv",
            "design_bert": "design_bert.csv",
            "fit": "fit.json",
            "evaluation": "evaluation.json",
            "report_dir": "report",
        }
        if name not in names:
            raise AttributeError(name)
        return self.root / names[name]


def _require(*paths: Path | None) -> None:
    for p in paths:
        if p is not None and not p.exists():
            raise InputError(f"missing input: {p}")


def _run_stage(cfg: PipelineConfig, stage: str, inputs: list[Path], settings: dict,
               body: Callable[[], list[Path]], force: bool) -> list[Path]:
    _require(*inputs)
    out = Path(cfg.paths.output)
    out.mkdir(parents=True, exist_ok=True)
    manifest = Manifest(out)
    digest = input_digest(stage, inputs, settings)
    if not force and manifest.up_to_date(stage, digest):
        log.info("stage %s is up to date", stage)
        return [Path(p) for p in manifest.entries[stage]["outputs"]]
    try:
        outputs = body()
    except Exception:
        manifest.mark_stale(stage)
        raise
    manifest.record(stage, digest, outputs)
    return outputs


# ---- stages -----------------------------------------------------------------

def stage_clean(cfg: PipelineConfig, force: bool = False) -> list[Path]:
    o = Outputs(cfg.paths.output)
    inputs = [cfg.paths.messages] + ([cfg.paths.history] if cfg.paths.history else [])

    def body() -> list[Path]:
        messages = [m for m in load_messages(cfg.paths.messages) if m.ticker in cfg.tickers]
        history: list[RawMessage] = list(messages)
        if cfg.paths.history:
            known = {m.id for m in messages}
            history += [m for m in load_messages(cfg.paths.history) if m.id not in known]
        registry = dedup_registry_build(history)
        llm, audit_llm = clean_corpus(messages, LLM_PROFILE, registry)
        bert, audit_bert = clean_corpus(messages, BERT_PROFILE, registry)
        write_cleaned(llm, o.cleaned_llm)
        write_cleaned(bert, o.cleaned_bert)
        write_audit(audit_llm + audit_bert, o.clean_audit)
        log.info("cleaned %d messages: %d kept (llm), %d kept (bert)", len(messages), len(llm), len(bert))
        return [o.cleaned_llm, o.cleaned_bert, o.clean_audit]

    return _run_stage(cfg, "clean", inputs, {"tickers": cfg.tickers}, body, force)


def stage_score(cfg: PipelineConfig, force: bool = False, client=None, echo: Callable[[str], None] = print
                ) -> list[Path]:
    o = Outputs(cfg.paths.output)
    prov = cfg.provider
    inputs = [o.cleaned_llm]
    if prov.kind == "replay" and prov.cache_path:
        inputs.append(Path(prov.cache_path))
    settings = config_digest_view(cfg)["provider"] | {"companies": config_digest_view(cfg)["companies"]}

    def body() -> list[Path]:
        cleaned = read_cleaned(o.cleaned_llm)
        bundles = [build_prompt(m, cfg.context_for(m.ticker), prov.model_id) for m in cleaned]
        provider = make_provider(prov, client)
        ledger = CostLedger()
        responses = score_batch(bundles, prov, provider, ledger)
        records = [parse_response(r) for r in responses]
        write_records(records, o.records)
        outputs = [o.records]
        if isinstance(provider, RemoteChatProvider):
            cache_path = Path(prov.cache_path) if prov.cache_path else o.replay_cache
            write_cache((provider.recorded[b.message_id] for b in bundles if b.message_id in provider.recorded),
                        cache_path)
        counts = {s.value: sum(r.status is s for r in records) for s in Status}
        summary = {"requests": ledger.requests, "failures": ledger.failures,
                   "total_cost_usd": round(ledger.total, 6), "status_counts": counts,
                   "na_share": counts["na"] / len(records) if records else 0.0}
        o.ledger.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        outputs.append(o.ledger)
        echo(f"scored {ledger.requests} prompts, {ledger.failures} failed, estimated cost {ledger.total:.2f} USD, "
             f"NA share {summary['na_share']:.1%}")
        return outputs

    return _run_stage(cfg, "score", inputs, settings, body, force)


def write_labels(labels: dict[str, list[MovementLabel]], path: Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["company", "date", "up"])
        for c, ls in labels.items():
            w.writerows([c, lab.date.isoformat(), lab.up] for lab in ls)


def read_labels(path: Path) -> dict[str, list[MovementLabel]]:
    out: dict[str, list[MovementLabel]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for r in csv.DictReader(fh):
            out.setdefault(r["company"], []).append(MovementLabel(r["company"], date.fromisoformat(r["date"]),
                                                                  int(r["up"])))
    return out


def _group(features: list[DailyFeatures], tickers: list[str]) -> dict[str, list[DailyFeatures]]:
    grouped: dict[str, list[DailyFeatures]] = {t: [] for t in tickers}
    for f in features:
        grouped[f.company].append(f)
    return grouped


def build_features(
    cfg: PipelineConfig,
    cleaned: list,
    records: list[SentimentRecord],
) -> tuple[dict[str, list[DailyFeatures]], dict[str, list[MovementLabel]]]:
    bars = prices_by_company(load_prices(cfg.paths.prices))
    labels, features = {}, {}
    by_id = {r.message_id: r for r in records}
    for t in cfg.tickers:
        if t not in bars:
            raise InputError(f"no prices for {t}")
        labels[t] = derive_labels(bars[t])
        calendar = TradingCalendar([b.date for b in bars[t]])
        stamped = [(m.timestamp_utc, by_id[m.id]) for m in cleaned if m.ticker == t and m.id in by_id]
        features[t] = daily_features(stamped, calendar, [lab.date for lab in labels[t]], t)
    return features, labels


def stage_featurize(cfg: PipelineConfig, force: bool = False) -> list[Path]:
    o = Outputs(cfg.paths.output)
    bert_path = cfg.paths.bert_sentiments
    inputs = [o.cleaned_llm, o.records, cfg.paths.prices]
    if bert_path:
        inputs += [o.cleaned_bert, o.clean_audit, bert_path]

    def body() -> list[Path]:
        feats, labels = build_features(cfg, read_cleaned(o.cleaned_llm), read_records(o.records))
        write_features([f for t in cfg.tickers for f in feats[t]], o.features_gpt)
        write_labels(labels, o.labels)
        outputs = [o.features_gpt, o.labels]
        if bert_path:
            cleaned_bert = read_cleaned(o.cleaned_bert)
            with open(o.clean_audit, encoding="utf-8") as fh:
                corpus_ids = {json.loads(line)["id"] for line in fh if line.strip()}
            rows = load_external_sentiments(bert_path, known_ids=corpus_ids)
            recs = [SentimentRecord(r.message_id, Status.PARSED, r.probs) for r in rows]
            bfeats, _ = build_features(cfg, cleaned_bert, recs)
            write_features([f for t in cfg.tickers for f in bfeats[t]], o.features_bert)
            outputs.append(o.features_bert)
        return outputs

    return _run_stage(cfg, "featurize", inputs, {"tickers": cfg.tickers}, body, force)


def _load_feature_sets(cfg: PipelineConfig):
    o = Outputs(cfg.paths.output)
    _require(o.features_gpt, o.labels)
    gpt = _group(read_features(o.features_gpt), cfg.tickers)
    bert = _group(read_features(o.features_bert), cfg.tickers) if cfg.paths.bert_sentiments else None
    return gpt, bert, read_labels(o.labels)


def _feature_inputs(cfg: PipelineConfig) -> list[Path]:
    o = Outputs(cfg.paths.output)
    return [o.features_gpt, o.labels] + ([o.features_bert] if cfg.paths.bert_sentiments else [])


def stage_fit(cfg: PipelineConfig, force: bool = False) -> list[Path]:
    o = Outputs(cfg.paths.output)
    settings = {"tol": cfg.tol, "max_iter": cfg.max_iter, "tickers": cfg.tickers}

    def body() -> list[Path]:
        gpt, bert, labels = _load_feature_sets(cfg)
        fits, outputs = {}, []
        for name, feats, path in (("gpt", gpt, o.design_gpt), ("bert", bert, o.design_bert)):
            if feats is None:
                continue
            design = stack(feats, labels, name)
            design.to_csv(path)
            outputs.append(path)
            fits[name] = json.loads(glm.fit(design, tol=cfg.tol, max_iter=cfg.max_iter).to_json())
        o.fit.write_text(json.dumps(fits, indent=2, sort_keys=True) + "\n")
        return outputs + [o.fit]

    return _run_stage(cfg, "fit", _feature_inputs(cfg), settings, body, force)


def _report_to_json(r: EvalReport) -> dict:
    nan = lambda x: None if isinstance(x, float) and math.isnan(x) else x  # noqa: E731
    return {
        "test_start": r.split.test_start, "year": r.split.year,
        "acc_naive": r.acc_naive, "acc_bert": nan(r.acc_bert), "acc_gpt": r.acc_gpt,
        "p_bert_vs_naive": nan(r.p_bert_vs_naive), "p_gpt_vs_naive": r.p_gpt_vs_naive, "n_test": r.n_test,
        "contingency_tables": {k: v.to_json() for k, v in r.contingency_tables.items()},
        "fits": {k: json.loads(f.to_json()) for k, f in r.fits.items()},
    }


def _report_from_json(d: dict) -> EvalReport:
    num = lambda x: math.nan if x is None else x  # noqa: E731
    tables = {k: McNemarResult(v["p_value"], v["b"], v["c"], tuple(map(tuple, v["table"])), v["method"],
                               v["statistic"]) for k, v in d["contingency_tables"].items()}
    fits = {}
    for k, f in d.get("fits", {}).items():
        coefs = list(f["coefficients"].values())
        fits[k] = glm.FitResult(np.array(coefs), f["converged"], f["iterations"], f["final_loglik"], np.array([]),
                                list(f["coefficients"]), f["separation"], f["warnings"])
    return EvalReport(SplitPlan(d["test_start"], d["year"]), d["acc_naive"], num(d["acc_bert"]), d["acc_gpt"],
                      num(d["p_bert_vs_naive"]), d["p_gpt_vs_naive"], d["n_test"], tables, fits)


def stage_evaluate(cfg: PipelineConfig, force: bool = False) -> list[Path]:
    o = Outputs(cfg.paths.output)
    settings = {"tol": cfg.tol, "max_iter": cfg.max_iter, "tickers": cfg.tickers,
                "plans": [(p.test_start, p.year) for p in cfg.split_plans]}

    def body() -> list[Path]:
        gpt, bert, labels = _load_feature_sets(cfg)
        reports = run_splits(gpt, labels, cfg.split_plans, bert, tol=cfg.tol, max_iter=cfg.max_iter)
        o.evaluation.write_text(json.dumps([_report_to_json(r) for r in reports], indent=2, sort_keys=True) + "\n")
        return [o.evaluation]

    return _run_stage(cfg, "evaluate", _feature_inputs(cfg), settings, body, force)


def stage_report(cfg: PipelineConfig, force: bool = False, echo: Callable[[str], None] = print) -> list[Path]:
    o = Outputs(cfg.paths.output)

    def body() -> list[Path]:
        reports = [_report_from_json(d) for d in json.loads(o.evaluation.read_text())]
        eda = _group(read_features(o.features_gpt), cfg.tickers)
        written = emit_report(reports, eda, o.report_dir)
        echo((o.report_dir / "results.txt").read_text().rstrip())
        return sorted(written.values())

    return _run_stage(cfg, "report", [o.evaluation, o.features_gpt], {"tickers": cfg.tickers}, body, force)


def run_all(cfg: PipelineConfig, force: bool = False, client=None, echo: Callable[[str], None] = print) -> None:
    stage_clean(cfg, force)
    stage_score(cfg, force, client, echo)
    stage_featurize(cfg, force)
    stage_fit(cfg, force)
    stage_evaluate(cfg, force)
    stage_report(cfg, force, echo)

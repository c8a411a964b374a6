"""Command-line driver.

Exit codes: 0 success, 2 input/config error, 3 provider error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .config import load_config
from .errors import PipelineError

STAGE_FUNCS = {
    "clean": lambda cfg, args: pipeline.stage_clean(cfg, args.force),
    "score": lambda cfg, args: pipeline.stage_score(cfg, args.force),
    "featurize": lambda cfg, args: pipeline.stage_featurize(cfg, args.force),
    "fit": lambda cfg, args: pipeline.stage_fit(cfg, args.force),
    "evaluate": lambda cfg, args: pipeline.stage_evaluate(cfg, args.force),
    "report": lambda cfg, args: pipeline.stage_report(cfg, args.force),
    "run": lambda cfg, args: pipeline.run_all(cfg, args.force),
}

HELP = {
    "clean": "clean messages under both profiles and drop duplicates",
    "score": "score llm-cleaned messages with the configured provider",
    "featurize": "aggregate records into daily features and derive labels",
    "fit": "fit full-sample models and export design matrices",
    "evaluate": "run the train/test splits and McNemar tests",
    "report": "write the results table and EDA data files",
    "run": "run every stage in order",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", "-c", default="config.toml", help="pipeline config (TOML)")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--force", action="store_true", help="rebuild stages even when up to date")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="stocksent", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in HELP.items():
        sub.add_parser(name, parents=[common], help=text, description=text)

    synth = sub.add_parser("synth", help="write a synthetic corpus and config", description="write a synthetic "
                           "two-company corpus with a replay cache and a ready-to-run config")
    synth.add_argument("outdir")
    synth.add_argument("--seed", type=int, default=0)
    synth.add_argument("--null", action="store_true", help="labels independent of the features")
    synth.add_argument("--msgs-per-day", type=int, default=50)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.command == "synth":
        from .synthetic import generate

        corpus = generate(args.outdir, args.seed, signal=not args.null, msgs_per_day=args.msgs_per_day)
        print(f"wrote synthetic corpus; run with: stocksent run --config {corpus.config}")
        return 0
    try:
        cfg = load_config(args.config, seed=args.seed)
        STAGE_FUNCS[args.command](cfg, args)
    except PipelineError as exc:
        print(f"stocksent {args.command}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"stocksent {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())

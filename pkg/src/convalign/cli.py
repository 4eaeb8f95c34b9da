"""Command-line entry points for the pipeline stages.

Every stage takes --config (a versioned JSON file), with --seed and --jobs
overrides; all randomness derives from the config seed, and each stage
writes the resolved config and its hash next to its outputs.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import pipeline, synthetic
from .config import PipelineConfig, load_config
from .errors import (ConfigInvalid, ConvalignError, MissingInput,
                     UpstreamStageFailed)

EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_CONFIG = 2
EXIT_UPSTREAM = 3
EXIT_RUNTIME = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, required=True,
                        help="pipeline config JSON")
    parser.add_argument("--seed", type=int, default=None,
                        help="override the config seed")
    parser.add_argument("--jobs", type=int, default=None,
                        help="worker threads for per-conversation stages")


def _load(args) -> PipelineConfig:
    config = load_config(args.config)
    return config.with_overrides(seed=args.seed, jobs=args.jobs)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="convalign",
        description="conversational-alignment scoring pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("ingest", "validate transcripts into the conversation store"),
        ("build-dataset", "context-response pairs, splits, negatives, vocab"),
        ("train-scorer", "train the configured neural scorers"),
        ("eval-recall", "recall@k table over the test split"),
        ("align", "per-conversation alignment scores and traces"),
        ("validate", "outcome associations with BH correction"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "validate":
            p.add_argument("--ca-csv", type=Path, default=None,
                           help="alignment-score CSV (defaults to the work dir's)")

    p = sub.add_parser("report", help="summarize a work directory")
    p.add_argument("work_dir", type=Path)

    p = sub.add_parser("synth", help="generate a synthetic corpus")
    p.add_argument("out_dir", type=Path)
    p.add_argument("--conversations", type=int, default=50)
    p.add_argument("--trend", choices=synthetic.TRENDS, default="converging")
    p.add_argument("--overlap", type=float, default=0.0)
    p.add_argument("--seed", type=int, default=0)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            pipeline.report(args.work_dir)
        elif args.command == "synth":
            spec = synthetic.SynthSpec(n_conversations=args.conversations,
                                       trend=args.trend,
                                       vocab_overlap=args.overlap,
                                       seed=args.seed)
            conversations, truth = synthetic.generate(spec)
            synthetic.write_corpus(conversations, truth, args.out_dir)
            print(f"wrote {len(conversations)} conversations to {args.out_dir}")
        else:
            config = _load(args)
            if args.command == "ingest":
                pipeline.ingest(config)
            elif args.command == "build-dataset":
                counts = pipeline.build_dataset(config)
                print(",".join(f"{k}={v}" for k, v in counts.items()))
            elif args.command == "train-scorer":
                pipeline.train_stage(config)
            elif args.command == "eval-recall":
                sys.stdout.write(pipeline.eval_recall(config))
            elif args.command == "align":
                pipeline.align(config)
            elif args.command == "validate":
                sys.stdout.write(pipeline.validate(config, args.ca_csv))
    except (ConfigInvalid, MissingInput) as exc:
        print(f"error [config/input]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UpstreamStageFailed as exc:
        print(f"error [upstream]: {exc}", file=sys.stderr)
        return EXIT_UPSTREAM
    except ConvalignError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:   # pragma: no cover - defensive
        print(f"error [unexpected]: {exc}", file=sys.stderr)
        return EXIT_UNEXPECTED
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

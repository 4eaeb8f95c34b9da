"""Bridge command line: serve, finetune, golden record/check, make-tokenizer."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import finetune as ft
from . import golden as gd
from .models import BridgeConfig, train_tokenizer
from .serve import serve


def _config_from_args(args) -> BridgeConfig:
    return BridgeConfig(
        model_source=args.model, tokenizer_path=args.tokenizer,
        corpus_path=getattr(args, "corpus", None),
        format=args.format, seed=args.seed,
        batch_size=getattr(args, "batch_size", 16))


def _add_model_args(parser):
    parser.add_argument("--model", default="seeded:tiny",
                        help="seeded:<tier> or local:<path>")
    parser.add_argument("--tokenizer", default=None,
                        help="tokenizer.json produced by make-tokenizer")
    parser.add_argument("--corpus", default=None,
                        help="text file to train a tokenizer from when no "
                             "tokenizer.json is given")
    parser.add_argument("--format", choices=("plain", "sep"), default="plain")
    parser.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nspbridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="answer wire-protocol requests on stdio")
    _add_model_args(p)
    p.add_argument("--batch-size", type=int, default=16)

    p = sub.add_parser("make-tokenizer", help="train tokenizer.json from text")
    p.add_argument("corpus", type=Path)
    p.add_argument("out", type=Path)
    p.add_argument("--vocab-size", type=int, default=2000)

    p = sub.add_parser("finetune", help="hyperparameter sweep on dataset JSONL")
    _add_model_args(p)
    p.add_argument("train", type=Path)
    p.add_argument("val", type=Path)
    p.add_argument("--out", type=Path, default=Path("sweep.csv"))
    p.add_argument("--checkpoint-dir", type=Path, default=None)
    p.add_argument("--batch-sizes", type=int, nargs="+", default=[16, 32])
    p.add_argument("--learning-rates", type=float, nargs="+",
                   default=[2e-5, 3e-5])
    p.add_argument("--epochs", type=int, nargs="+", default=[2])
    p.add_argument("--max-train", type=int, default=None)
    p.add_argument("--max-val", type=int, default=None)

    for name in ("golden-record", "golden-check"):
        p = sub.add_parser(name)
        _add_model_args(p)
        p.add_argument("path", type=Path)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "make-tokenizer":
        lines = args.corpus.read_text(encoding="utf-8").splitlines()
        train_tokenizer(lines, args.vocab_size, args.out)
        print(f"wrote {args.out}")
        return 0

    config = _config_from_args(args)
    if args.command == "serve":
        serve(config)
        return 0
    if args.command == "finetune":
        grid = {"batch_sizes": tuple(args.batch_sizes),
                "learning_rates": tuple(args.learning_rates),
                "epochs": tuple(args.epochs)}
        result = ft.sweep(config, args.train, args.val, grid=grid,
                          checkpoint_dir=args.checkpoint_dir,
                          max_train=args.max_train, max_val=args.max_val)
        args.out.write_text(result.to_csv(), encoding="utf-8")
        sys.stdout.write(result.to_csv())
        return 0
    if args.command == "golden-record":
        payload = gd.record(config, args.path)
        print(f"recorded {len(payload['probabilities'])} probabilities")
        return 0
    if args.command == "golden-check":
        outcome = gd.check(config, args.path)
        print(json.dumps(outcome, indent=2, sort_keys=True))
        return 0 if outcome["ok"] else 1
    return 2


if __name__ == "__main__":
    sys.exit(main())

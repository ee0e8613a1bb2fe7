"""Command line for the patch classifier: train and predict."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .predict import predict_patches
from .train import TrainConfig, load_checkpoint, train


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ilfnet", description="Patch classifier for retargeting forensics")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train on a corpus manifest")
    p.add_argument("--manifest", required=True, help="corpus manifest JSONL")
    p.add_argument("--config", default=None, help="training config JSON")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")

    p = sub.add_parser("predict", help="emit per-patch probabilities")
    p.add_argument("--ckpt", required=True)
    p.add_argument("--patches", required=True, help="patch manifest JSONL")
    p.add_argument("--root", default=None,
                   help="directory the patch image_ids are relative to "
                        "(default: the patch manifest's directory)")
    p.add_argument("--out", required=True, help="predictions JSONL")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "train":
            config = (TrainConfig.from_json(args.config) if args.config
                      else TrainConfig())
            if args.seed is not None:
                config.seed = args.seed
            summary = train(args.manifest, config, args.out)
            print(f"best val acc {summary['best_val_acc']:.2f}% -> {args.out}")
        else:
            model, _ = load_checkpoint(args.ckpt)
            root = args.root if args.root else Path(args.patches).parent
            n = predict_patches(model, args.patches, root, args.out)
            print(f"{n} patch predictions -> {args.out}")
        return 0
    except (ValueError, OSError, KeyError, json.JSONDecodeError) as exc:
        print(f"ilfnet {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

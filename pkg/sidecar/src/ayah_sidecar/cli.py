"""CLI: ``ayah-sidecar serve`` and ``ayah-sidecar finetune``."""

from __future__ import annotations

import argparse
import logging
import sys

from .model import DEFAULT_BASE
from .server import serve
from .train import SidecarDataError, TrainConfig, finetune


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ayah-sidecar", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the scoring HTTP service")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", help="checkpoint directory")
    group.add_argument("--echo", action="store_true", help="score 0.5 for everything (contract testing)")
    p.add_argument("--port", type=int, default=8765)

    p = sub.add_parser("finetune", help="fine-tune a pair classifier from pairs JSONL")
    p.add_argument("--pairs", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--base", default=DEFAULT_BASE)
    p.add_argument("--epochs", type=int, default=1)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--loss", choices=["pointwise", "pairwise"], default="pointwise")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        serve(args.model, port=args.port, echo=args.echo)
        return 0
    try:
        out = finetune(
            TrainConfig(
                pairs_path=args.pairs,
                out_dir=args.out,
                base=args.base,
                epochs=args.epochs,
                learning_rate=args.lr,
                batch_size=args.batch_size,
                seed=args.seed,
                loss=args.loss,
            )
        )
    except (SidecarDataError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"checkpoint saved to {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""CLI driver: finetune one architecture or run zero-shot classification."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .errors import HarnessError
from .finetune import finetune
from .protocol import ARCHITECTURES, TrainProtocol
from .zeroshot import ZeroShotRun, default_class_texts, pairs_from_manifest, zero_shot_classify

log = logging.getLogger(__name__)


def cmd_finetune(args: argparse.Namespace) -> int:
    protocol = TrainProtocol(
        architecture=args.arch,
        batch_size=args.batch_size,
        max_epochs=args.max_epochs,
        early_stop_patience=args.patience,
        learning_rate=args.learning_rate,
        image_size=args.image_size,
        pretrained=args.pretrained,
        seed=args.seed,
    )
    if args.tiny:
        protocol = protocol.tiny()
    try:
        predictions = finetune(args.manifest, protocol, args.out, checkpoint_path=args.checkpoint)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"finetune[{args.arch}]: {len(predictions)} test predictions -> {args.out}")
    return 0


def cmd_zeroshot(args: argparse.Namespace) -> int:
    try:
        pairs = pairs_from_manifest(args.manifest, split=args.split)
        if args.benign_text and args.malware_text:
            class_texts = {"benign": _text_arg(args.benign_text), "malware": _text_arg(args.malware_text)}
        else:
            class_texts = default_class_texts(args.manifest)
        run = ZeroShotRun(pairs=pairs, class_texts=class_texts, backend=args.backend)
        predictions = zero_shot_classify(run, args.out, model_id=args.model_id)
    except HarnessError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"zeroshot[{args.backend}]: {len(predictions)} predictions -> {args.out}")
    return 0


def _text_arg(value: str) -> str:
    path = Path(value)
    if path.is_file():
        return path.read_text(encoding="utf-8").strip()
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="train-harness",
        description="Model experiments over dataset manifests: CNN fine-tuning "
        "and zero-shot image-text classification.",
    )
    parser.add_argument("--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("finetune", help="fine-tune one architecture, emit test predictions")
    p.add_argument("--manifest", required=True)
    p.add_argument("--arch", choices=ARCHITECTURES, required=True)
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.add_argument("--checkpoint", help="optional path for the best-epoch checkpoint")
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--max-epochs", type=int, default=20)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--learning-rate", type=float, default=1e-4)
    p.add_argument("--image-size", type=int, default=None,
                   help="resize inputs at load time (default: native resolution)")
    p.add_argument("--pretrained", action="store_true",
                   help="start from pretrained backbone weights (needs download access)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tiny", action="store_true",
                   help="smoke configuration: one epoch, 64px inputs")
    p.set_defaults(func=cmd_finetune)

    p = sub.add_parser("zeroshot", help="zero-shot classify image/text pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--split", default=None, help="restrict to one split (default: all pairs)")
    p.add_argument("--backend", choices=["hash", "clip"], default="hash")
    p.add_argument("--model-id", default=None, help="override the clip backend model id")
    p.add_argument("--benign-text", help="candidate text (or file) for the benign class")
    p.add_argument("--malware-text", help="candidate text (or file) for the malware class")
    p.set_defaults(func=cmd_zeroshot)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    return args.func(args)


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

"""
predict command: per-question answer distributions as JSON lines
"""
import argparse
import logging
from typing import Any, Dict

import settings
from commands.common import QUALITIES, SPLIT_CHOICES, bundles_for
from models.reason_net import load_checkpoint
from utils.dataset import dataset_files, load_dataset
from utils.manifest import build_manifest, write_file_manifest
from utils.training import predict

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("predict", help="score questions with a checkpoint")
    parser.add_argument("--data", default=settings.DATA_DIR, help="dataset directory written by gen")
    parser.add_argument("--checkpoint", required=True)
    parser.add_argument("--out", required=True, help="scores file (JSON lines)")
    parser.add_argument("--split", choices=SPLIT_CHOICES, default="all")
    parser.add_argument("--quality", choices=QUALITIES, help="re-synthesise features at this quality")
    parser.add_argument("--tag", default="", help="model name carried by the scores")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> Dict[str, Any]:
    dataset = load_dataset(args.data)
    checkpoint = load_checkpoint(args.checkpoint)
    items = dataset.split_items(args.split)
    scores = predict(checkpoint, items, bundles_for(dataset, args.quality), args.out, args.tag)
    summary = {
        "command": "predict",
        "out": args.out,
        "split": args.split,
        "questions": len(scores.scores),
        "vocab_fingerprint": scores.vocab_fingerprint,
    }
    write_file_manifest(args.out, build_manifest(
        command=args.argv,
        seed=checkpoint.seed,
        config={"model": checkpoint.config.model_dump(mode="json"), "split": args.split, "quality": args.quality,
                "tag": args.tag},
        inputs=[args.checkpoint] + dataset_files(args.data),
        outputs=[args.out],
        summary=summary,
        split_hash=dataset.split_hash,
    ))
    logger.info(f"Scored {len(scores.scores)} questions of split {args.split}")
    return summary

"""
eval command: accuracy overall, per template and against the majority baseline
"""
import argparse
import logging
from typing import Any, Dict

import settings
from commands.common import QUALITIES, SPLIT_CHOICES, bundles_for, tag_of
from models.reason_net import load_checkpoint
from storage import read_jsonl, write_json
from utils.dataset import dataset_files, load_dataset
from utils.manifest import build_manifest, write_file_manifest
from utils.training import evaluate, evaluate_scores, read_score_records

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("eval", help="evaluate a checkpoint or a scores file")
    parser.add_argument("--data", default=settings.DATA_DIR, help="dataset directory written by gen")
    source = parser.add_mutually_exclusive_group(required=True)
    source.add_argument("--checkpoint")
    source.add_argument("--scores", help="scores file written by predict or ensemble")
    parser.add_argument("--split", choices=SPLIT_CHOICES, default="val")
    parser.add_argument("--quality", choices=QUALITIES, help="re-synthesise features at this quality")
    parser.add_argument("--out", help="write the full report (with confusion table) here")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> Dict[str, Any]:
    dataset = load_dataset(args.data)
    items = dataset.split_items(args.split)
    train_items = dataset.split_items("train")
    if args.checkpoint:
        checkpoint = load_checkpoint(args.checkpoint)
        report = evaluate(checkpoint, items, bundles_for(dataset, args.quality), train_items)
        seed = checkpoint.seed
    else:
        scores = read_score_records(read_jsonl(args.scores), tag_of(args.scores))
        report = evaluate_scores(scores, items, train_items)
        seed = dataset.seed
    logger.info(f"Accuracy on {args.split}: {report.accuracy:.4f} ({report.correct}/{report.total})")
    summary = {
        "command": "eval",
        "split": args.split,
        "accuracy": report.accuracy,
        "correct": report.correct,
        "total": report.total,
        "majority_baseline": report.majority_baseline,
        "per_template": {t: s.accuracy for t, s in report.per_template.items()},
    }
    if args.out:
        write_json(args.out, report.model_dump(mode="json"))
        write_file_manifest(args.out, build_manifest(
            command=args.argv,
            seed=seed,
            config={"split": args.split, "quality": args.quality},
            inputs=[args.checkpoint or args.scores] + dataset_files(args.data),
            outputs=[args.out],
            summary=summary,
            split_hash=dataset.split_hash,
        ))
    return summary

"""
ensemble command: weight search on validation, report on validation and test
"""
import argparse
import logging
import os
from typing import Any, Dict

import settings
from commands.common import gold_for, tag_of
from storage import ensure_dir, read_jsonl, write_json, write_jsonl
from utils.dataset import load_dataset
from utils.ensemble import ensemble_report
from utils.manifest import build_manifest, write_manifest
from utils.training import read_score_records, score_records

logger = logging.getLogger(__name__)

REPORT_FILE = "ensemble_report.json"
SCORES_FILE = "ensemble_scores.jsonl"


def register(subparsers) -> None:
    parser = subparsers.add_parser("ensemble", help="combine the scores of several models")
    parser.add_argument("--data", default=settings.DATA_DIR, help="dataset directory written by gen")
    parser.add_argument("--scores", nargs="+", required=True, help="scores files written by predict")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--step", type=float, default=0.05, help="weight lattice step; must divide 1")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> Dict[str, Any]:
    dataset = load_dataset(args.data)
    sets = [read_score_records(read_jsonl(path), tag_of(path)) for path in args.scores]
    gold_val = gold_for(dataset, "val")
    gold_test = gold_for(dataset, "test")
    if not all(qid in sets[0].scores for qid in gold_test):
        logger.warning("Scores do not cover the test split; reporting validation only")
        gold_test = None

    report, weighted = ensemble_report(sets, gold_val, gold_test, args.step)

    ensure_dir(args.out)
    outputs = [os.path.join(args.out, REPORT_FILE), os.path.join(args.out, SCORES_FILE)]
    write_json(outputs[0], report.model_dump(mode="json"))
    write_jsonl(outputs[1], score_records(weighted))
    summary = {"command": "ensemble", "out": args.out, **report.model_dump(mode="json")}
    write_manifest(args.out, build_manifest(
        command=args.argv,
        seed=dataset.seed,
        config={"step": args.step, "models": report.models},
        inputs=list(args.scores),
        outputs=outputs,
        summary=summary,
        split_hash=dataset.split_hash,
    ))
    logger.info(f"Weighted ensemble {report.weighted_val:.4f} vs average {report.average_val:.4f} on validation")
    return summary

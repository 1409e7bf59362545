"""
ablate command: the ablation grid as JSON and as a text table
"""
import argparse
import logging
import os
from typing import Any, Dict

import settings
from commands.common import train_config_from
from storage import ensure_dir, write_json, write_text
from utils.ablation import SUITE_SEEDS, ablation_suite, format_table, suite_config
from utils.dataset import load_dataset
from utils.manifest import build_manifest, write_manifest

logger = logging.getLogger(__name__)

REPORT_FILE = "ablation.json"
TABLE_FILE = "ablation.txt"


def register(subparsers) -> None:
    parser = subparsers.add_parser("ablate", help="run the ablation grid")
    parser.add_argument("--data", default=settings.DATA_DIR, help="dataset directory written by gen")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--suite", choices=sorted(SUITE_SEEDS), default="quick")
    parser.add_argument("--jobs", type=int, default=settings.JOBS, help="parallel training runs")
    parser.add_argument("--config", help="JSON file with base TrainConfig fields")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> Dict[str, Any]:
    dataset = load_dataset(args.data)
    base, seeds = suite_config(train_config_from(args, dataset), args.suite)
    report = ablation_suite(dataset, base, seeds, args.suite, max(1, args.jobs))
    table = format_table(report)

    ensure_dir(args.out)
    outputs = [os.path.join(args.out, REPORT_FILE), os.path.join(args.out, TABLE_FILE)]
    write_json(outputs[0], report.model_dump(mode="json"))
    write_text(outputs[1], table)
    summary = {
        "command": "ablate",
        "out": args.out,
        "suite": args.suite,
        "seeds": seeds,
        "rows": {row.name: row.validation for row in report.rows},
    }
    write_manifest(args.out, build_manifest(
        command=args.argv,
        seed=base.seed,
        config=base.model_dump(mode="json"),
        inputs=[args.config] if args.config else [],
        outputs=outputs,
        summary=summary,
        split_hash=dataset.split_hash,
    ))
    logger.info(f"Ablation table written to {outputs[1]}")
    return summary

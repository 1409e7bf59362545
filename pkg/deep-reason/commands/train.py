"""
train command: fit the reasoning network with early stopping
"""
import argparse
import logging
import os
from typing import Any, Dict

import settings
from commands.common import add_config_flags, bundles_for, train_config_from
from models.reason_net import write_checkpoint
from storage import ensure_dir, write_json
from utils.dataset import dataset_files, load_dataset
from utils.manifest import build_manifest, write_manifest
from utils.training import train

logger = logging.getLogger(__name__)

CHECKPOINT_FILE = "checkpoint.json"
HISTORY_FILE = "history.json"
CONFIG_FILE = "config.json"


def register(subparsers) -> None:
    parser = subparsers.add_parser("train", help="train a model on a generated dataset")
    parser.add_argument("--data", default=settings.DATA_DIR, help="dataset directory written by gen")
    parser.add_argument("--out", required=True, help="output directory")
    add_config_flags(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> Dict[str, Any]:
    """Train on the train split, select on val, write the best checkpoint"""
    dataset = load_dataset(args.data)
    cfg = train_config_from(args, dataset)
    bundles = bundles_for(dataset, cfg.quality.value if cfg.quality else None)

    checkpoint, history = train(dataset.split_items("train"), dataset.split_items("val"), bundles, cfg)

    ensure_dir(args.out)
    outputs = [os.path.join(args.out, name) for name in (CHECKPOINT_FILE, HISTORY_FILE, CONFIG_FILE)]
    write_checkpoint(checkpoint, outputs[0])
    write_json(outputs[1], history.model_dump(mode="json"))
    write_json(outputs[2], cfg.model_dump(mode="json"))

    summary = {
        "command": "train",
        "out": args.out,
        "epochs": len(history.epochs),
        "best_epoch": history.best_epoch,
        "best_val_accuracy": history.best_val_accuracy,
        "stopped_early": history.stopped_early,
        "stop_reason": history.stop_reason,
    }
    manifest = build_manifest(
        command=args.argv,
        seed=cfg.seed,
        config=cfg.model_dump(mode="json"),
        inputs=dataset_files(args.data),
        outputs=outputs,
        summary=summary,
        split_hash=dataset.split_hash,
    )
    write_manifest(args.out, manifest)
    logger.info(f"Checkpoint written to {outputs[0]}")
    return summary

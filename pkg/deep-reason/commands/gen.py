"""
gen command: synthetic scenes, features, questions and splits
"""
import argparse
import logging
import os
from typing import Any, Dict

import settings
from commands.common import QUALITIES, positive_int
from schemas.world import Quality, WorldConfig
from storage import ensure_dir, read_json
from utils.dataset import generate_dataset, write_dataset
from utils.manifest import build_manifest, write_manifest

logger = logging.getLogger(__name__)


def register(subparsers) -> None:
    parser = subparsers.add_parser("gen", help="generate a synthetic dataset")
    parser.add_argument("--out", default=settings.DATA_DIR, help="output directory")
    parser.add_argument("--num-images", type=positive_int, default=100)
    parser.add_argument("--questions-per-image", type=positive_int, default=10)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--quality", choices=QUALITIES, default=Quality.HIGH.value)
    parser.add_argument("--world", help="JSON file with WorldConfig fields")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace) -> Dict[str, Any]:
    """Generate and write the dataset"""
    world = WorldConfig(**read_json(args.world)) if args.world else WorldConfig()
    dataset = generate_dataset(args.num_images, args.questions_per_image, args.seed, Quality(args.quality), world)

    ensure_dir(args.out)
    outputs = write_dataset(dataset, args.out)
    summary = {
        "command": "gen",
        "out": args.out,
        "images": len(dataset.scenes),
        "questions": len(dataset.items),
        "splits": {name: len(ids) for name, ids in dataset.splits.items()},
        "split_hash": dataset.split_hash,
    }
    manifest = build_manifest(
        command=args.argv,
        seed=args.seed,
        config={"world": world.model_dump(mode="json"), "quality": args.quality,
                "num_images": args.num_images, "questions_per_image": args.questions_per_image},
        inputs=[args.world] if args.world else [],
        outputs=outputs,
        summary=summary,
        split_hash=dataset.split_hash,
    )
    write_manifest(args.out, manifest)
    logger.info(f"Dataset written to {os.path.abspath(args.out)}")
    return summary

"""
Helpers shared by the command modules
"""
import argparse
import os
from typing import Any, Dict, Optional

from schemas.config import EncoderKind, TrainConfig
from schemas.world import FeatureBundle, Quality
from storage import read_json
from utils.dataset import Dataset, requality

QUALITIES = [q.value for q in Quality]
SPLIT_CHOICES = ["train", "val", "test", "all"]

# flag dest -> TrainConfig field
TRAIN_FLAGS = {
    "lr": "learning_rate",
    "batch_size": "batch_size",
    "epochs": "max_epochs",
    "patience": "patience",
    "seed": "seed",
    "quality": "quality",
}

# flag dest -> ModelConfig field
MODEL_FLAGS = {
    "embed_dim": "embed_dim",
    "hidden_dim": "hidden_dim",
    "query_dim": "query_dim",
    "attention_dim": "attention_dim",
    "mlp_hidden": "mlp_hidden",
    "encoder": "encoder_kind",
    "dropout_rate": "dropout_rate",
    "spatial": "use_spatial",
    "bbox_position": "use_bbox_position",
    "bbox_size": "use_bbox_size",
    "program": "use_program",
    "spatial_coords": "spatial_coords",
}


def add_config_flags(parser: argparse.ArgumentParser) -> None:
    """--config plus the optimizer and model flags; unset flags stay None"""
    parser.add_argument("--config", help="JSON file with TrainConfig fields")
    parser.add_argument("--lr", type=float)
    parser.add_argument("--batch-size", type=int)
    parser.add_argument("--epochs", type=int)
    parser.add_argument("--patience", type=int)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--quality", choices=QUALITIES, help="re-synthesise features at this quality")
    parser.add_argument("--embed-dim", type=int)
    parser.add_argument("--hidden-dim", type=int)
    parser.add_argument("--query-dim", type=int)
    parser.add_argument("--attention-dim", type=int)
    parser.add_argument("--mlp-hidden", type=int)
    parser.add_argument("--encoder", choices=[k.value for k in EncoderKind])
    parser.add_argument("--dropout-rate", type=float)
    for flag in ("spatial", "bbox-position", "bbox-size", "program", "spatial-coords"):
        parser.add_argument(f"--{flag}", action=argparse.BooleanOptionalAction, default=None)


def train_config_from(args: argparse.Namespace, dataset: Optional[Dataset] = None) -> TrainConfig:
    """pydantic defaults < --config file < explicit flags; dataset fixes D, G and C"""
    raw: Dict[str, Any] = read_json(args.config) if getattr(args, "config", None) else {}
    model: Dict[str, Any] = dict(raw.pop("model", {}) or {})
    for dest, field in TRAIN_FLAGS.items():
        if getattr(args, dest, None) is not None:
            raw[field] = getattr(args, dest)
    for dest, field in MODEL_FLAGS.items():
        if getattr(args, dest, None) is not None:
            model[field] = getattr(args, dest)
    if dataset is not None:
        model["detection_dim"] = dataset.world.detection_dim
        model["grid_size"] = dataset.world.grid_size
        model["spatial_dim"] = dataset.world.spatial_dim
    if getattr(args, "data", None):
        raw["data_dir"] = args.data
    raw["model"] = model
    return TrainConfig(**raw)


def bundles_for(dataset: Dataset, quality: Optional[str]) -> Dict[str, FeatureBundle]:
    return requality(dataset, Quality(quality)) if quality else dataset.bundles


def gold_for(dataset: Dataset, split: str) -> Dict[str, str]:
    return {item.qid: item.answer for item in dataset.split_items(split)}


def tag_of(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def positive_int(text: str) -> int:
    """argparse type for counts that must be at least one"""
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer")
    if value < 1:
        raise argparse.ArgumentTypeError(f"{value} is below 1")
    return value

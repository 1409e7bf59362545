"""
Ablation grid: feature quality, feature pipelines, bounding-box columns,
question encoder and program channel
"""
import logging
from concurrent.futures import ProcessPoolExecutor
from statistics import median
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel

from schemas.config import EncoderKind, TrainConfig
from schemas.program import MULTI_STEP_TEMPLATES, SPATIAL_TEMPLATES
from schemas.reports import AblationReport, AblationRow
from schemas.world import Quality
from storage import canonical_json
from utils.dataset import Dataset, requality
from utils.training import evaluate, subset_accuracy, train

logger = logging.getLogger(__name__)

SUITE_SEEDS = {"full": [0, 1, 2], "quick": [0]}
QUICK_MAX_EPOCHS = 2

NO_BBOX = {"use_bbox_position": False, "use_bbox_size": False}


class AblationSetting(BaseModel):
    group: str
    name: str
    quality: Optional[Quality] = None
    model: Dict[str, object] = {}


ABLATION_SETTINGS: List[AblationSetting] = [
    AblationSetting(group="quality", name="Low-quality detection features", quality=Quality.LOW),
    AblationSetting(group="quality", name="Medium-quality detection features", quality=Quality.MED),
    AblationSetting(group="quality", name="High-quality detection features", quality=Quality.HIGH),
    AblationSetting(group="pipelines", name="Detection features", model={"use_spatial": False, **NO_BBOX}),
    AblationSetting(group="pipelines", name="Detection and spatial features", model={"use_spatial": True, **NO_BBOX}),
    AblationSetting(group="bbox", name="Baseline", model={"use_spatial": False, **NO_BBOX}),
    AblationSetting(group="bbox", name="Baseline with position features",
                    model={"use_spatial": False, "use_bbox_position": True, "use_bbox_size": False}),
    AblationSetting(group="bbox", name="Baseline with position and size features",
                    model={"use_spatial": False, "use_bbox_position": True, "use_bbox_size": True}),
    AblationSetting(group="encoder", name="GRU", model={"encoder_kind": EncoderKind.GRU}),
    AblationSetting(group="encoder", name="Bayesian GRU", model={"encoder_kind": EncoderKind.BAYESIAN_GRU}),
    AblationSetting(group="program", name="Without program", model={"use_program": False}),
    AblationSetting(group="program", name="With program", model={"use_program": True}),
]


def setting_config(base: TrainConfig, setting: AblationSetting, seed: int,
                   dataset_quality: Optional[Quality] = None) -> TrainConfig:
    """Config of one row and seed; quality is resolved to the one training will see, so rows that
    only differ by an unset quality share a job key"""
    model = base.model.model_copy(update=setting.model)
    quality = setting.quality or base.quality or dataset_quality
    return base.model_copy(update={"model": model, "seed": seed, "quality": quality})


def run_job(dataset: Dataset, cfg: TrainConfig) -> Tuple[float, float, float]:
    """Train one configuration; (overall, spatial, multi-step) validation accuracy"""
    bundles = requality(dataset, cfg.quality) if cfg.quality else dataset.bundles
    train_items, val_items = dataset.split_items("train"), dataset.split_items("val")
    checkpoint, _ = train(train_items, val_items, bundles, cfg)
    report = evaluate(checkpoint, val_items, bundles)
    return (
        report.accuracy,
        subset_accuracy(report, SPATIAL_TEMPLATES),
        subset_accuracy(report, MULTI_STEP_TEMPLATES),
    )


def job_key(cfg: TrainConfig) -> str:
    return canonical_json(cfg.model_dump(mode="json"))


def ablation_suite(dataset: Dataset, base: TrainConfig, seeds: Sequence[int], suite: str = "custom",
                   jobs: int = 1) -> AblationReport:
    """Median over seeds of every ablation row; identical configurations train once"""
    configs = {
        (index, seed): setting_config(base, setting, seed, dataset.quality)
        for index, setting in enumerate(ABLATION_SETTINGS)
        for seed in seeds
    }
    unique: Dict[str, TrainConfig] = {}
    for cfg in configs.values():
        unique.setdefault(job_key(cfg), cfg)
    logger.info(f"Ablation suite {suite}: {len(ABLATION_SETTINGS)} rows, {len(unique)} training runs, jobs={jobs}")

    keys = list(unique)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_job, [dataset] * len(keys), [unique[k] for k in keys]))
    else:
        outcomes = [run_job(dataset, unique[k]) for k in keys]
    results = dict(zip(keys, outcomes))

    rows = []
    for index, setting in enumerate(ABLATION_SETTINGS):
        runs = [results[job_key(configs[(index, seed)])] for seed in seeds]
        rows.append(AblationRow(
            name=setting.name,
            group=setting.group,
            validation=median(r[0] for r in runs),
            spatial=median(r[1] for r in runs),
            multi_step=median(r[2] for r in runs),
            runs=[r[0] for r in runs],
        ))
    return AblationReport(suite=suite, seeds=list(seeds), split_hash=dataset.split_hash, rows=rows)


def suite_config(base: TrainConfig, suite: str) -> Tuple[TrainConfig, List[int]]:
    """Seeds and epoch budget of a named suite"""
    seeds = SUITE_SEEDS[suite]
    if suite == "quick":
        base = base.model_copy(update={"max_epochs": min(base.max_epochs, QUICK_MAX_EPOCHS)})
    return base, seeds


def format_table(report: AblationReport) -> str:
    """Aligned plain-text table, accuracies in percent"""
    header = ("Models", "Validation", "Spatial", "Multi-step")
    body = [(row.name, f"{100 * row.validation:.2f}", f"{100 * row.spatial:.2f}", f"{100 * row.multi_step:.2f}")
            for row in report.rows]
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]

    def line(cells):
        first = cells[0].ljust(widths[0])
        rest = [c.rjust(w) for c, w in zip(cells[1:], widths[1:])]
        return " | ".join([first] + rest)

    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), rule] + [line(r) for r in body]) + "\n"

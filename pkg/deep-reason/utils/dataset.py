"""
Dataset generation, persistence, splits and feature re-synthesis
"""
import logging
import os
from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel

from errors import InputError, UninstantiableTemplate, UsageError
from schemas.program import QAItem, TemplateId
from schemas.world import FeatureBundle, FeatureFlags, Quality, SceneGraph, WorldConfig
from storage import canonical_json, iter_jsonl, read_json, round_array, sha256_text, write_json, write_jsonl
from utils.features import AttributeProjection, build_feature_bundle, make_projection
from utils.programs import parse_program, program_text
from utils.questions import gen_question
from utils.seeding import derive_rng
from utils.vocab import ANSWER_FINGERPRINT, check_fingerprint
from utils.world import gen_scene

logger = logging.getLogger(__name__)

SCENES_FILE = "scenes.jsonl"
QUESTIONS_FILE = "questions.jsonl"
SPLITS_FILE = "splits.json"
DATASET_FILE = "dataset.json"

SPLITS = ("train", "val", "test")
VAL_FRACTION = 0.15
TEST_FRACTION = 0.15

TEMPLATE_ORDER = list(TemplateId)

# Other templates tried when one cannot be instantiated on a scene
TEMPLATE_ATTEMPTS = len(TEMPLATE_ORDER)


class Dataset(BaseModel):
    """Scenes, their raw feature bundles, questions and the image split"""
    seed: int
    quality: Quality
    world: WorldConfig
    scenes: Dict[str, SceneGraph]
    bundles: Dict[str, FeatureBundle]
    items: List[QAItem]
    splits: Dict[str, List[str]]

    class Config:
        arbitrary_types_allowed = True

    def projection(self) -> AttributeProjection:
        return make_projection(self.seed, self.world.detection_dim, self.world.spatial_dim)

    def split_items(self, split: str) -> List[QAItem]:
        """Items of one split, or all items for 'all'"""
        if split == "all":
            return list(self.items)
        if split not in self.splits:
            raise UsageError(f"Unknown split {split!r}; expected one of {', '.join(SPLITS)} or all")
        images = set(self.splits[split])
        return [item for item in self.items if item.image_id in images]

    @property
    def split_hash(self) -> str:
        return sha256_text(canonical_json(self.splits))[:16]


def _rounded(bundle: FeatureBundle) -> FeatureBundle:
    """Bundle as it reads back from scenes.jsonl"""
    return FeatureBundle(
        detection=np.array(round_array(bundle.detection)).reshape(bundle.detection.shape),
        spatial=None if bundle.spatial is None else np.array(round_array(bundle.spatial)),
        bbox=np.array(round_array(bundle.bbox)).reshape(bundle.bbox.shape),
        flags=bundle.flags,
    )


def synthesize_bundle(scene: SceneGraph, quality: Quality, seed: int, world: WorldConfig,
                      projection: AttributeProjection, sigma: Optional[float] = None) -> FeatureBundle:
    """Raw bundle (spatial on, no bbox columns) from the scene's own feature stream"""
    rng = derive_rng(seed, "features", scene.image_id)
    bundle = build_feature_bundle(scene, quality, FeatureFlags(), rng, projection, world.grid_size, sigma)
    return _rounded(bundle)


def split_images(image_ids: List[str], seed: int) -> Dict[str, List[str]]:
    """Seeded 70/15/15 split by image so no scene crosses splits"""
    order = [image_ids[i] for i in derive_rng(seed, "split").permutation(len(image_ids))]
    n_val = int(round(len(order) * VAL_FRACTION))
    n_test = int(round(len(order) * TEST_FRACTION))
    return {
        "train": sorted(order[n_val + n_test:]),
        "val": sorted(order[:n_val]),
        "test": sorted(order[n_val: n_val + n_test]),
    }


def generate_questions(scene: SceneGraph, count: int, seed: int) -> List[QAItem]:
    """`count` questions cycling through the templates from a random offset"""
    rng = derive_rng(seed, "questions", scene.image_id)
    offset = int(rng.integers(len(TEMPLATE_ORDER)))
    items = []
    for q in range(count):
        for attempt in range(TEMPLATE_ATTEMPTS):
            template = TEMPLATE_ORDER[(offset + q + attempt) % len(TEMPLATE_ORDER)]
            try:
                items.append(gen_question(scene, template, rng, qid=f"{scene.image_id}-q{q}"))
                break
            except UninstantiableTemplate as e:
                logger.debug(f"Skipped template: {e.detail}")
    return items


def generate_dataset(num_images: int, questions_per_image: int, seed: int,
                     quality: Quality = Quality.HIGH, world: Optional[WorldConfig] = None) -> Dataset:
    """Deterministic in (num_images, questions_per_image, seed, quality, world)"""
    if num_images < 1 or questions_per_image < 1:
        raise InputError("Need at least one image and one question per image")
    world = world or WorldConfig()
    quality = Quality(quality)
    projection = make_projection(seed, world.detection_dim, world.spatial_dim)
    scenes, bundles, items = {}, {}, []
    for index in range(num_images):
        image_id = f"img{index:05d}"
        scene = gen_scene(derive_rng(seed, "scene", image_id), world, image_id)
        scenes[image_id] = scene
        bundles[image_id] = synthesize_bundle(scene, quality, seed, world, projection)
        items.extend(generate_questions(scene, questions_per_image, seed))
    logger.info(f"Generated {len(scenes)} scenes and {len(items)} questions (seed={seed}, quality={quality.value})")
    return Dataset(
        seed=seed,
        quality=quality,
        world=world,
        scenes=scenes,
        bundles=bundles,
        items=items,
        splits=split_images(list(scenes), seed),
    )


def requality(dataset: Dataset, quality: Quality, sigma: Optional[float] = None) -> Dict[str, FeatureBundle]:
    """Feature bundles re-synthesised from the stored scenes at another quality"""
    quality = Quality(quality)
    if quality == dataset.quality and sigma is None:
        return dataset.bundles
    projection = dataset.projection()
    return {
        image_id: synthesize_bundle(scene, quality, dataset.seed, dataset.world, projection, sigma)
        for image_id, scene in dataset.scenes.items()
    }


# Persistence

def scene_record(scene: SceneGraph, bundle: FeatureBundle) -> dict:
    record = scene.model_dump(mode="json")
    record["detection"] = round_array(bundle.raw_detection)
    record["spatial"] = None if bundle.spatial is None else round_array(bundle.spatial)
    record["bbox"] = round_array(bundle.bbox)
    return record


def question_record(item: QAItem) -> dict:
    return {
        "qid": item.qid,
        "image_id": item.image_id,
        "template": item.template.value,
        "question": " ".join(item.question),
        "program": program_text(item.program),
        "answer": item.answer,
    }


def dataset_files(data_dir: str) -> List[str]:
    return [os.path.join(data_dir, name) for name in (SCENES_FILE, QUESTIONS_FILE, SPLITS_FILE, DATASET_FILE)]


def write_dataset(dataset: Dataset, out_dir: str) -> List[str]:
    """Write the dataset files; returns their paths"""
    paths = dataset_files(out_dir)
    write_jsonl(paths[0], (scene_record(s, dataset.bundles[i]) for i, s in dataset.scenes.items()))
    write_jsonl(paths[1], (question_record(item) for item in dataset.items))
    write_json(paths[2], dataset.splits)
    write_json(paths[3], {
        "seed": dataset.seed,
        "quality": dataset.quality.value,
        "world": dataset.world.model_dump(mode="json"),
        "vocab_fingerprint": ANSWER_FINGERPRINT,
        "num_images": len(dataset.scenes),
        "num_questions": len(dataset.items),
    })
    return paths


def load_dataset(data_dir: str) -> Dataset:
    """Read a dataset written by write_dataset; malformed records are contract errors"""
    try:
        return _read_dataset(data_dir)
    except (KeyError, TypeError, AttributeError, ValueError) as e:
        raise InputError(f"Dataset {data_dir} is malformed: {type(e).__name__}: {e}")


def _read_dataset(data_dir: str) -> Dataset:
    meta = read_json(os.path.join(data_dir, DATASET_FILE))
    check_fingerprint(meta["vocab_fingerprint"], f"Dataset {data_dir}")
    scenes, bundles = {}, {}
    for record in iter_jsonl(os.path.join(data_dir, SCENES_FILE)):
        features = {key: record.pop(key) for key in ("detection", "spatial", "bbox")}
        scene = SceneGraph(**record)
        count = len(scene.objects)
        scenes[scene.image_id] = scene
        bundles[scene.image_id] = FeatureBundle(
            detection=np.array(features["detection"], dtype=np.float64).reshape(count, -1),
            spatial=None if features["spatial"] is None else np.array(features["spatial"], dtype=np.float64),
            bbox=np.array(features["bbox"], dtype=np.float64).reshape(count, 4),
            flags=FeatureFlags(use_spatial=features["spatial"] is not None),
        )
    items = []
    for record in iter_jsonl(os.path.join(data_dir, QUESTIONS_FILE)):
        record["question"] = record["question"].split()
        record["program"] = parse_program(record["program"].split())
        items.append(QAItem(**record))
    dataset = Dataset(
        seed=meta["seed"],
        quality=Quality(meta["quality"]),
        world=WorldConfig(**meta["world"]),
        scenes=scenes,
        bundles=bundles,
        items=items,
        splits=read_json(os.path.join(data_dir, SPLITS_FILE)),
    )
    logger.info(f"Loaded {len(scenes)} scenes and {len(items)} questions from {data_dir}")
    return dataset

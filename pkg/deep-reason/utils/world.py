"""
Synthetic scene generation
"""
import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from errors import ConfigError, ParameterError
from schemas.world import Color, Material, SceneGraph, SceneObject, Shape, SizeClass, WorldConfig

logger = logging.getLogger(__name__)

MIN_CANVAS = 64

SHAPES = list(Shape)
COLORS = list(Color)
SIZES = list(SizeClass)
MATERIALS = list(Material)


def validate_world_config(cfg: WorldConfig) -> None:
    if cfg.min_objects > cfg.max_objects:
        raise ConfigError(f"min_objects {cfg.min_objects} exceeds max_objects {cfg.max_objects}")
    if cfg.width < MIN_CANVAS or cfg.height < MIN_CANVAS:
        raise ConfigError(f"Canvas {cfg.width}x{cfg.height} is smaller than {MIN_CANVAS}x{MIN_CANVAS}")
    for name in ("small_side", "large_side"):
        lo, hi = getattr(cfg, name)
        if lo < 1 or lo > hi:
            raise ConfigError(f"{name} must be an increasing range of positive sides, got {(lo, hi)}")
        if hi > min(cfg.width, cfg.height):
            raise ConfigError(f"{name} {hi} does not fit a {cfg.width}x{cfg.height} canvas")


def well_separated(center: Tuple[float, float], others: Sequence[Tuple[float, float]], cfg: WorldConfig) -> bool:
    """Distance and per-axis gap to every placed centre"""
    cx, cy = center
    for ox, oy in others:
        if math.hypot(cx - ox, cy - oy) < cfg.min_sep:
            return False
        if abs(cx - ox) < cfg.min_axis_gap or abs(cy - oy) < cfg.min_axis_gap:
            return False
    return True


def check_separation(scene: SceneGraph, cfg: WorldConfig) -> bool:
    centers = [o.center for o in scene.objects]
    return all(well_separated(c, centers[:i], cfg) for i, c in enumerate(centers))


def _place_objects(rng: np.random.Generator, cfg: WorldConfig, count: int) -> List[SceneObject]:
    objects: List[SceneObject] = []
    centers: List[Tuple[float, float]] = []
    for object_id in range(count):
        size_class = SIZES[rng.integers(len(SIZES))]
        lo, hi = cfg.small_side if size_class == SizeClass.SMALL else cfg.large_side
        w = int(rng.integers(lo, hi + 1))
        h = int(rng.integers(lo, hi + 1))
        placed = None
        for _ in range(cfg.placement_retries):
            x = int(rng.integers(0, cfg.width - w + 1))
            y = int(rng.integers(0, cfg.height - h + 1))
            center = (x + w / 2.0, y + h / 2.0)
            if well_separated(center, centers, cfg):
                placed = (x, y)
                centers.append(center)
                break
        if placed is None:
            return []
        objects.append(SceneObject(
            id=object_id,
            shape=SHAPES[rng.integers(len(SHAPES))],
            color=COLORS[rng.integers(len(COLORS))],
            size_class=size_class,
            material=MATERIALS[rng.integers(len(MATERIALS))],
            bbox=(placed[0], placed[1], w, h),
        ))
    return objects


def gen_scene(rng: np.random.Generator, cfg: WorldConfig, image_id: str = "img0") -> SceneGraph:
    """Random scene with uniform object count and attributes.

    Boxes are rejection-sampled so that every pair of centres is at least
    min_sep apart and differs by min_axis_gap on both axes.
    """
    validate_world_config(cfg)
    for attempt in range(cfg.scene_retries):
        count = int(rng.integers(cfg.min_objects, cfg.max_objects + 1))
        objects = _place_objects(rng, cfg, count)
        if objects:
            return SceneGraph(image_id=image_id, width=cfg.width, height=cfg.height, objects=objects)
        logger.debug(f"Scene {image_id}: placement of {count} objects failed (attempt {attempt + 1})")
    raise ConfigError(
        f"Cannot place {cfg.min_objects}-{cfg.max_objects} objects with min_sep {cfg.min_sep} "
        f"on a {cfg.width}x{cfg.height} canvas after {cfg.scene_retries} attempts"
    )


def bbox_normalize(bbox: Sequence[float], width: float, height: float) -> Tuple[float, float, float, float]:
    """Pixel (x, y, w, h) to normalised (centre x, centre y, width, height)"""
    if width <= 0 or height <= 0:
        raise ParameterError(f"Canvas size must be positive, got {width}x{height}")
    x, y, w, h = bbox
    return (x + w / 2.0) / width, (y + h / 2.0) / height, w / width, h / height


def translate_scene(scene: SceneGraph, dx: int, dy: int) -> SceneGraph:
    """Same objects shifted by (dx, dy) pixels"""
    objects = [
        o.model_copy(update={"bbox": (o.bbox[0] + dx, o.bbox[1] + dy, o.bbox[2], o.bbox[3])})
        for o in scene.objects
    ]
    return SceneGraph(image_id=scene.image_id, width=scene.width, height=scene.height, objects=objects)

"""
Pydantic schemas for synthetic scenes and their image features
"""
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator, validator


class Shape(str, Enum):
    CUBE = "cube"
    SPHERE = "sphere"
    PYRAMID = "pyramid"
    CYLINDER = "cylinder"


class Color(str, Enum):
    RED = "red"
    GREEN = "green"
    BLUE = "blue"
    YELLOW = "yellow"
    GRAY = "gray"


class SizeClass(str, Enum):
    SMALL = "small"
    LARGE = "large"


class Material(str, Enum):
    MATTE = "matte"
    SHINY = "shiny"


class Quality(str, Enum):
    """Detection feature quality; stands in for the detector backbone"""
    LOW = "low"
    MED = "med"
    HIGH = "high"


NOISE_SIGMA: Dict[Quality, float] = {
    Quality.LOW: 0.8,
    Quality.MED: 0.4,
    Quality.HIGH: 0.15,
}

# Attribute groups in one-hot order: shape, color, size, material
ATTRIBUTE_GROUPS: Tuple[Tuple[str, type], ...] = (
    ("shape", Shape),
    ("color", Color),
    ("size", SizeClass),
    ("material", Material),
)

ENCODING_WIDTH = sum(len(enum) for _, enum in ATTRIBUTE_GROUPS)


class WorldConfig(BaseModel):
    """Scene generation and feature synthesis settings"""
    width: int = Field(224, gt=0)
    height: int = Field(224, gt=0)
    min_objects: int = Field(3, ge=1)
    max_objects: int = Field(8, ge=1)
    min_sep: float = Field(28.0, ge=0)
    # centres must also differ by this much on each axis so relations never tie
    min_axis_gap: float = Field(4.0, ge=0)
    small_side: Tuple[int, int] = (16, 28)
    large_side: Tuple[int, int] = (36, 52)
    detection_dim: int = Field(64, gt=0)
    grid_size: int = Field(7, gt=0)
    spatial_dim: int = Field(32, gt=0)
    placement_retries: int = Field(200, ge=1)
    scene_retries: int = Field(50, ge=1)


class SceneObject(BaseModel):
    """One object of a scene; bbox is (x, y, w, h) in pixels from the top-left corner"""
    id: int
    shape: Shape
    color: Color
    size_class: SizeClass
    material: Material
    bbox: Tuple[int, int, int, int]

    @validator("bbox")
    def validate_bbox(cls, v):
        x, y, w, h = v
        if x < 0 or y < 0 or w <= 0 or h <= 0:
            raise ValueError("bbox needs x, y >= 0 and w, h > 0")
        return v

    @property
    def center(self) -> Tuple[float, float]:
        x, y, w, h = self.bbox
        return x + w / 2.0, y + h / 2.0

    def attribute(self, attribute_type: str) -> str:
        """Attribute value by program attribute type (shape, color, size, material)"""
        if attribute_type == "size":
            return self.size_class.value
        return getattr(self, attribute_type).value

    def attributes(self) -> Dict[str, str]:
        return {name: self.attribute(name) for name, _ in ATTRIBUTE_GROUPS}


class SceneGraph(BaseModel):
    """Canvas plus objects; the ground truth the question oracle runs on"""
    image_id: str
    width: int = Field(..., gt=0)
    height: int = Field(..., gt=0)
    objects: List[SceneObject]

    @model_validator(mode="after")
    def check_objects(self):
        ids = [o.id for o in self.objects]
        if len(set(ids)) != len(ids):
            raise ValueError("object ids must be unique")
        for o in self.objects:
            x, y, w, h = o.bbox
            if x + w > self.width or y + h > self.height:
                raise ValueError(f"object {o.id} leaves the canvas")
        return self


class FeatureFlags(BaseModel):
    """Which feature sources reach the model"""
    use_detection: bool = True
    use_spatial: bool = True
    use_bbox_position: bool = False
    use_bbox_size: bool = False

    @property
    def extra_columns(self) -> int:
        return 2 * int(self.use_bbox_position) + 2 * int(self.use_bbox_size)


class FeatureBundle(BaseModel):
    """Image input of the model.

    detection: N x (D [+2 position] [+2 size]); spatial: G x G x C or None
    when spatial features are off; bbox: N x 4 normalised (xc, yc, w, h).
    """
    detection: np.ndarray
    spatial: Optional[np.ndarray] = None
    bbox: np.ndarray
    flags: FeatureFlags = FeatureFlags()

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def check_shapes(self):
        if self.detection.ndim != 2 or self.bbox.shape != (self.detection.shape[0], 4):
            raise ValueError("detection and bbox must have one row per object")
        if self.bbox.size and (self.bbox.min() < 0.0 or self.bbox.max() > 1.0):
            raise ValueError("bbox entries must lie in [0, 1]")
        if self.spatial is not None and self.spatial.ndim != 3:
            raise ValueError("spatial features must be G x G x C")
        return self

    @property
    def object_count(self) -> int:
        return self.detection.shape[0]

    @property
    def raw_detection(self) -> np.ndarray:
        """Detection rows without the bbox columns"""
        extra = self.flags.extra_columns
        return self.detection[:, : self.detection.shape[1] - extra]

    def with_flags(self, flags: FeatureFlags) -> "FeatureBundle":
        """Same features viewed under another flag set"""
        columns = [self.raw_detection]
        if flags.use_bbox_position:
            columns.append(self.bbox[:, :2])
        if flags.use_bbox_size:
            columns.append(self.bbox[:, 2:])
        spatial = self.spatial if flags.use_spatial else None
        if flags.use_spatial and spatial is None:
            raise ValueError("spatial features were not synthesised for this bundle")
        return FeatureBundle(
            detection=np.concatenate(columns, axis=1),
            spatial=spatial,
            bbox=self.bbox,
            flags=flags,
        )

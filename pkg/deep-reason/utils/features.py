"""
Detection, spatial and bounding-box feature synthesis
"""
from typing import Dict, List, Optional, Union

import numpy as np
from pydantic import BaseModel

from errors import ParameterError
from schemas.world import (
    ATTRIBUTE_GROUPS,
    ENCODING_WIDTH,
    NOISE_SIGMA,
    FeatureBundle,
    FeatureFlags,
    Quality,
    SceneGraph,
    SceneObject,
)
from utils.seeding import derive_rng
from utils.world import bbox_normalize

MIN_GRID = 4


class AttributeProjection(BaseModel):
    """Row-orthonormal maps from the attribute encoding to D (detection) and C (spatial)"""
    detection: np.ndarray
    spatial: np.ndarray

    class Config:
        arbitrary_types_allowed = True

    @property
    def detection_dim(self) -> int:
        return self.detection.shape[1]

    @property
    def spatial_dim(self) -> int:
        return self.spatial.shape[1]


def _orthonormal_rows(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((cols, rows)))
    # fix column signs so the result does not depend on the QR backend's convention
    q = q * np.where(np.diag(r) < 0, -1.0, 1.0)
    return q.T


def make_projection(seed: int, detection_dim: int = 64, spatial_dim: int = 32) -> AttributeProjection:
    """Fixed projections shared by every scene of one dataset"""
    for name, dim in (("detection_dim", detection_dim), ("spatial_dim", spatial_dim)):
        if dim < ENCODING_WIDTH:
            raise ParameterError(f"{name} must be at least {ENCODING_WIDTH}, got {dim}")
    rng = derive_rng(seed, "projection")
    return AttributeProjection(
        detection=_orthonormal_rows(ENCODING_WIDTH, detection_dim, rng),
        spatial=_orthonormal_rows(ENCODING_WIDTH, spatial_dim, rng),
    )


def encode_object(obj: SceneObject) -> np.ndarray:
    """one-hot(shape) + one-hot(color) + one-hot(size) + one-hot(material), concatenated"""
    encoding = np.zeros(ENCODING_WIDTH)
    offset = 0
    for name, enum in ATTRIBUTE_GROUPS:
        values = [member.value for member in enum]
        encoding[offset + values.index(obj.attribute(name))] = 1.0
        offset += len(values)
    return encoding


def noise_sigma(quality: Union[Quality, str], sigma: Optional[float] = None) -> float:
    if sigma is not None:
        if sigma < 0:
            raise ParameterError(f"Noise sigma must be non-negative, got {sigma}")
        return float(sigma)
    try:
        return NOISE_SIGMA[Quality(quality)]
    except ValueError:
        raise ParameterError(f"Unknown feature quality {quality!r}")


def synth_detection_features(scene: SceneGraph, quality: Union[Quality, str], rng: np.random.Generator,
                             projection: AttributeProjection, sigma: Optional[float] = None) -> np.ndarray:
    """N x D attribute encodings plus Gaussian noise; box positions never enter"""
    sigma = noise_sigma(quality, sigma)
    count = len(scene.objects)
    encodings = np.array([encode_object(o) for o in scene.objects]).reshape(count, ENCODING_WIDTH)
    noise = rng.standard_normal((count, projection.detection_dim))
    return encodings @ projection.detection + sigma * noise


def decode_attributes(rows: np.ndarray, projection: AttributeProjection) -> List[Dict[str, str]]:
    """Nearest attribute per group after projecting rows back to the encoding space"""
    coords = np.atleast_2d(rows)[:, : projection.detection_dim] @ projection.detection.T
    decoded = []
    for row in coords:
        attributes = {}
        offset = 0
        for name, enum in ATTRIBUTE_GROUPS:
            values = [member.value for member in enum]
            attributes[name] = values[int(np.argmax(row[offset: offset + len(values)]))]
            offset += len(values)
        decoded.append(attributes)
    return decoded


def cell_bounds(index: int, extent: int, grid_size: int):
    return index * extent / grid_size, (index + 1) * extent / grid_size


def overlapped_cells(obj: SceneObject, width: int, height: int, grid_size: int) -> List[tuple]:
    """(row, col) of every cell the box overlaps with positive area"""
    x, y, w, h = obj.bbox
    cells = []
    for i in range(grid_size):
        y0, y1 = cell_bounds(i, height, grid_size)
        if not (y < y1 and y + h > y0):
            continue
        for j in range(grid_size):
            x0, x1 = cell_bounds(j, width, grid_size)
            if x < x1 and x + w > x0:
                cells.append((i, j))
    return cells


def synth_spatial_features(scene: SceneGraph, quality: Union[Quality, str], rng: np.random.Generator,
                           projection: AttributeProjection, grid_size: int = 7,
                           sigma: Optional[float] = None) -> np.ndarray:
    """G x G x C grid; each cell sums the encodings of the objects covering it, plus noise"""
    if grid_size < MIN_GRID:
        raise ParameterError(f"grid_size must be at least {MIN_GRID}, got {grid_size}")
    sigma = noise_sigma(quality, sigma)
    grid = np.zeros((grid_size, grid_size, projection.spatial_dim))
    for obj in scene.objects:
        encoding = encode_object(obj) @ projection.spatial
        for i, j in overlapped_cells(obj, scene.width, scene.height, grid_size):
            grid[i, j] += encoding
    return grid + sigma * rng.standard_normal(grid.shape)


def bbox_matrix(scene: SceneGraph) -> np.ndarray:
    return np.array(
        [bbox_normalize(o.bbox, scene.width, scene.height) for o in scene.objects], dtype=np.float64
    ).reshape(len(scene.objects), 4)


def build_feature_bundle(scene: SceneGraph, quality: Union[Quality, str], flags: FeatureFlags,
                         rng: np.random.Generator, projection: AttributeProjection, grid_size: int = 7,
                         sigma: Optional[float] = None) -> FeatureBundle:
    """Detection (widened by the enabled bbox columns), spatial grid and normalised boxes"""
    if not flags.use_detection:
        raise ParameterError("Detection features cannot be switched off")
    detection = synth_detection_features(scene, quality, rng, projection, sigma)
    spatial = None
    if flags.use_spatial:
        spatial = synth_spatial_features(scene, quality, rng, projection, grid_size, sigma)
    raw = FeatureBundle(
        detection=detection,
        spatial=spatial,
        bbox=bbox_matrix(scene),
        flags=FeatureFlags(use_spatial=flags.use_spatial),
    )
    return raw.with_flags(flags)

"""
Tests for scene generation and feature synthesis
"""
import pytest
import numpy as np
import sys
import os

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import ConfigError, ParameterError
from schemas.world import FeatureFlags, Quality, SceneGraph, SceneObject, WorldConfig
from utils.features import (
    build_feature_bundle,
    decode_attributes,
    make_projection,
    overlapped_cells,
    synth_detection_features,
    synth_spatial_features,
)
from utils.seeding import derive_rng, derive_seed
from utils.world import bbox_normalize, check_separation, gen_scene, translate_scene


@pytest.fixture
def scene():
    return SceneGraph(image_id="img-test", width=224, height=224, objects=[
        SceneObject(id=0, shape="cube", color="red", size_class="small", material="matte", bbox=(20, 20, 20, 20)),
        SceneObject(id=1, shape="sphere", color="blue", size_class="large", material="shiny",
                    bbox=(100, 60, 40, 40)),
        SceneObject(id=2, shape="cylinder", color="green", size_class="small", material="matte",
                    bbox=(60, 150, 24, 24)),
    ])


@pytest.fixture
def projection():
    return make_projection(0)


class TestSeeding:
    """Seed derivation"""

    def test_stable_and_label_sensitive(self):
        """Test derived seeds are stable and differ per label"""
        assert derive_seed(0, "scene", "img00000") == derive_seed(0, "scene", "img00000")
        assert derive_seed(0, "scene", "img00000") != derive_seed(0, "scene", "img00001")
        assert derive_seed(0, "scene") != derive_seed(1, "scene")


class TestSceneGeneration:
    """Random scenes"""

    def test_deterministic_per_seed(self):
        """Test the same seed gives the same scene"""
        cfg = WorldConfig()
        a = gen_scene(derive_rng(3, "scene"), cfg, "img")
        b = gen_scene(derive_rng(3, "scene"), cfg, "img")
        assert a == b

    def test_constraints_hold(self):
        """Test object count, canvas and separation constraints"""
        cfg = WorldConfig()
        for k in range(30):
            scene = gen_scene(derive_rng(k, "scene"), cfg, f"img{k}")
            assert cfg.min_objects <= len(scene.objects) <= cfg.max_objects
            assert check_separation(scene, cfg)
            centers = [o.center for o in scene.objects]
            for i in range(len(centers)):
                for j in range(i + 1, len(centers)):
                    assert abs(centers[i][0] - centers[j][0]) >= cfg.min_axis_gap
                    assert abs(centers[i][1] - centers[j][1]) >= cfg.min_axis_gap

    def test_min_above_max(self):
        """Test min_objects > max_objects raises ConfigError"""
        with pytest.raises(ConfigError):
            gen_scene(np.random.default_rng(0), WorldConfig(min_objects=5, max_objects=3))

    def test_small_canvas(self):
        """Test a canvas under 64 pixels raises ConfigError"""
        with pytest.raises(ConfigError):
            gen_scene(np.random.default_rng(0), WorldConfig(width=32, height=32, small_side=(4, 6),
                                                            large_side=(8, 10)))

    def test_infeasible_placement(self):
        """Test an impossible separation raises ConfigError after bounded retries"""
        cfg = WorldConfig(min_objects=8, max_objects=8, min_sep=200.0, placement_retries=5, scene_retries=2)
        with pytest.raises(ConfigError):
            gen_scene(np.random.default_rng(0), cfg)


class TestBoxes:
    """Bounding box normalisation"""

    def test_normalize(self):
        """Test pixel boxes map to normalised centre and size"""
        assert bbox_normalize((10, 20, 40, 60), 200, 100) == pytest.approx((0.15, 0.5, 0.2, 0.6))

    def test_normalize_wide_canvas(self):
        """Test a 40 x 60 box at (20, 30) on a 200 x 100 canvas"""
        assert bbox_normalize((20, 30, 40, 60), 200, 100) == pytest.approx((0.2, 0.6, 0.2, 0.6))

    @pytest.mark.parametrize("width,height", [(0, 100), (100, -1)])
    def test_non_positive_canvas(self, width, height):
        """Test a non-positive canvas raises ParameterError"""
        with pytest.raises(ParameterError):
            bbox_normalize((0, 0, 1, 1), width, height)


class TestDetectionFeatures:
    """Attribute encodings with noise"""

    def test_shape(self, scene, projection):
        """Test one D-dimensional row per object"""
        rows = synth_detection_features(scene, Quality.HIGH, np.random.default_rng(0), projection)
        assert rows.shape == (3, 64)

    def test_sigma_override(self, scene, projection):
        """Test sigma=0 gives the noiseless decode of every object"""
        rows = synth_detection_features(scene, Quality.LOW, np.random.default_rng(0), projection, sigma=0.0)
        assert decode_attributes(rows, projection) == [o.attributes() for o in scene.objects]

    def test_unknown_quality(self, scene, projection):
        """Test an unknown quality raises ParameterError"""
        with pytest.raises(ParameterError):
            synth_detection_features(scene, "ultra", np.random.default_rng(0), projection)

    def test_small_detection_dim(self):
        """Test D below the encoding width raises ParameterError"""
        with pytest.raises(ParameterError):
            make_projection(0, detection_dim=12)

    def test_high_quality_decodes(self, projection):
        """Test high quality features decode to the true attributes at least 99 percent of the time"""
        cfg = WorldConfig()
        hits = total = 0
        for k in range(100):
            scene = gen_scene(derive_rng(k, "scene"), cfg, f"img{k}")
            rows = synth_detection_features(scene, Quality.HIGH, derive_rng(k, "noise"), projection)
            for obj, decoded in zip(scene.objects, decode_attributes(rows, projection)):
                hits += int(decoded == obj.attributes())
                total += 1
        assert hits / total >= 0.99

    def test_decoding_degrades_with_quality(self, projection):
        """Test exact decodes are ordered high >= medium >= low under the same noise draws"""
        cfg = WorldConfig()
        rates = {}
        for quality in (Quality.HIGH, Quality.MED, Quality.LOW):
            hits = total = 0
            for k in range(60):
                scene = gen_scene(derive_rng(k, "scene"), cfg, f"img{k}")
                rows = synth_detection_features(scene, quality, derive_rng(k, "noise"), projection)
                for obj, decoded in zip(scene.objects, decode_attributes(rows, projection)):
                    hits += int(decoded == obj.attributes())
                    total += 1
            rates[quality] = hits / total
        assert rates[Quality.HIGH] >= rates[Quality.MED] >= rates[Quality.LOW]
        assert rates[Quality.HIGH] > rates[Quality.LOW]

    def test_translation_invariance(self, scene, projection):
        """Test moving every box leaves detection bitwise unchanged but changes spatial and bbox"""
        moved = translate_scene(scene, 30, 10)
        flags = FeatureFlags(use_spatial=True, use_bbox_position=True)
        before = build_feature_bundle(scene, Quality.MED, flags, np.random.default_rng(5), projection)
        after = build_feature_bundle(moved, Quality.MED, flags, np.random.default_rng(5), projection)
        assert before.raw_detection.tobytes() == after.raw_detection.tobytes()
        assert not np.array_equal(before.spatial, after.spatial)
        assert not np.array_equal(before.bbox, after.bbox)


class TestSpatialFeatures:
    """Grid features"""

    def test_grid_shape(self, scene, projection):
        """Test the grid is G x G x C"""
        grid = synth_spatial_features(scene, Quality.HIGH, np.random.default_rng(0), projection)
        assert grid.shape == (7, 7, 32)

    def test_cells_hold_overlapping_objects(self, scene, projection):
        """Test noiseless cells are non-zero exactly where a box overlaps"""
        grid = synth_spatial_features(scene, Quality.HIGH, np.random.default_rng(0), projection, sigma=0.0)
        covered = {cell for o in scene.objects for cell in overlapped_cells(o, 224, 224, 7)}
        for i in range(7):
            for j in range(7):
                assert (np.abs(grid[i, j]).sum() > 0) == ((i, j) in covered)

    def test_overlap_boundaries(self, scene):
        """Test a box touching a cell edge does not count as overlapping it"""
        # 224 / 7 = 32 px cells; box 20..40 spans columns 0 and 1
        assert overlapped_cells(scene.objects[0], 224, 224, 7) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        edge = SceneObject(id=9, shape="cube", color="red", size_class="small", material="matte",
                           bbox=(32, 32, 32, 32))
        assert overlapped_cells(edge, 224, 224, 7) == [(1, 1)]

    def test_one_cell_shift_moves_the_grid(self, scene, projection):
        """Test shifting every box by one 32 px cell moves the noiseless grid one column"""
        before = synth_spatial_features(scene, Quality.HIGH, np.random.default_rng(0), projection, sigma=0.0)
        moved = translate_scene(scene, 32, 0)
        after = synth_spatial_features(moved, Quality.HIGH, np.random.default_rng(0), projection, sigma=0.0)
        np.testing.assert_array_equal(after[:, 1:], before[:, :-1])
        np.testing.assert_array_equal(after[:, 0], np.zeros_like(after[:, 0]))
        np.testing.assert_array_equal(before[:, -1], np.zeros_like(before[:, -1]))

    def test_small_grid(self, scene, projection):
        """Test G below 4 raises ParameterError"""
        with pytest.raises(ParameterError):
            synth_spatial_features(scene, Quality.HIGH, np.random.default_rng(0), projection, grid_size=3)


class TestFeatureBundle:
    """Assembled model input"""

    @pytest.mark.parametrize("position,size,width", [(False, False, 64), (True, False, 66), (True, True, 68)])
    def test_bbox_columns(self, scene, projection, position, size, width):
        """Test each bbox flag widens detection rows by two"""
        flags = FeatureFlags(use_spatial=False, use_bbox_position=position, use_bbox_size=size)
        bundle = build_feature_bundle(scene, Quality.HIGH, flags, np.random.default_rng(0), projection)
        assert bundle.detection.shape == (3, width)
        assert bundle.spatial is None

    def test_with_flags_round_trip(self, scene, projection):
        """Test re-deriving a view keeps the raw detection rows"""
        bundle = build_feature_bundle(scene, Quality.HIGH, FeatureFlags(), np.random.default_rng(0), projection)
        wide = bundle.with_flags(FeatureFlags(use_bbox_position=True, use_bbox_size=True))
        np.testing.assert_array_equal(wide.raw_detection, bundle.detection)
        np.testing.assert_array_equal(wide.detection[:, 64:66], bundle.bbox[:, :2])

    def test_detection_cannot_be_disabled(self, scene, projection):
        """Test use_detection=False raises ParameterError"""
        with pytest.raises(ParameterError):
            build_feature_bundle(scene, Quality.HIGH, FeatureFlags(use_detection=False),
                                 np.random.default_rng(0), projection)

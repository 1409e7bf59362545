"""
Tests for the reason network and its checkpoints
"""
import pytest
import numpy as np
import sys
import os

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import (
    CheckpointFingerprintError,
    CheckpointShapeError,
    CheckpointVersionError,
    ContractError,
    InputError,
)
from models.reason_net import (
    encode,
    forward,
    governed_parameters,
    init_params,
    load_checkpoint,
    make_batch,
    params_from_checkpoint,
    param_shapes,
    predict_proba,
    save_checkpoint,
    write_checkpoint,
)
from schemas.config import EncoderKind, ModelConfig
from schemas.world import FeatureBundle
from storage import read_json, write_json
from utils.dataset import generate_dataset, requality
from utils.gradcheck import TOLERANCE, check_gradients, model_case, tiny_model_config
from utils.vocab import ANSWER_VOCAB


@pytest.fixture(scope="module")
def tiny():
    cfg, world = tiny_model_config(seed=0)
    dataset = generate_dataset(num_images=4, questions_per_image=3, seed=0, world=world)
    return cfg, dataset


class TestParameters:
    """Named tensors and their seeding"""

    def test_names_follow_flags(self, tiny):
        """Test program and spatial tensors exist only with their flags"""
        cfg, _ = tiny
        names = set(param_shapes(cfg))
        assert "program.embedding" in names
        assert "spatial_attention.W_v" in names
        off = set(param_shapes(cfg.model_copy(update={"use_program": False, "use_spatial": False})))
        assert not any(n.startswith("program.") or n.startswith("spatial_attention.") for n in off)

    def test_joint_projection_shape(self, tiny):
        """Test joint.W maps [F_q, F_p] (2H) to Q"""
        cfg, _ = tiny
        assert param_shapes(cfg)["joint.W"] == (2 * cfg.hidden_dim, cfg.query_dim)

    def test_flag_toggle_touches_only_governed_tensors(self, tiny):
        """Test toggling use_program leaves every shared tensor bitwise equal"""
        cfg, _ = tiny
        on = init_params(cfg)
        off = init_params(cfg.model_copy(update={"use_program": False}))
        governed = set(governed_parameters("use_program", cfg))
        assert set(on) - set(off) == governed
        for name in off:
            assert on[name].data.tobytes() == off[name].data.tobytes()

    def test_spatial_coords_widen_by_two(self, tiny):
        """Test spatial cells are C + 2 wide with coordinates and exactly C without"""
        cfg, _ = tiny
        with_coords = param_shapes(cfg.model_copy(update={"spatial_coords": True}))
        without = param_shapes(cfg)
        assert with_coords["spatial_attention.W_v"][0] == cfg.spatial_dim + 2
        assert without["spatial_attention.W_v"][0] == cfg.spatial_dim
        assert with_coords["classifier.W1"][0] - without["classifier.W1"][0] == 2

    def test_classifier_width_monotone_in_flags(self, tiny):
        """Test each feature flag can only widen the classifier input"""
        cfg, _ = tiny
        base = cfg.model_copy(update={"use_spatial": False, "use_bbox_position": False, "use_bbox_size": False})
        widths = [param_shapes(base)["classifier.W1"][0]]
        for flag in ("use_bbox_position", "use_bbox_size", "use_spatial"):
            base = base.model_copy(update={flag: True})
            widths.append(param_shapes(base)["classifier.W1"][0])
        assert widths == sorted(widths)
        assert widths[-1] - widths[-2] == cfg.cell_width

    def test_default_spatial_pipeline_is_exactly_c_wide(self):
        """Test switching use_spatial off shrinks the default classifier input by exactly C"""
        on = ModelConfig(detection_dim=32, grid_size=6, spatial_dim=32)
        off = on.model_copy(update={"use_spatial": False})
        assert not on.spatial_coords
        assert on.classifier_width - off.classifier_width == on.spatial_dim
        assert param_shapes(on)["classifier.W1"][0] - param_shapes(off)["classifier.W1"][0] == 32
        assert param_shapes(on)["spatial_attention.W_v"][0] == 32

    def test_unknown_flag(self):
        """Test an unknown flag name is rejected"""
        with pytest.raises(ContractError):
            governed_parameters("use_magic")


class TestForward:
    """Eval-mode forward pass"""

    def test_probabilities(self, tiny):
        """Test K probabilities per item summing to one"""
        cfg, dataset = tiny
        params = init_params(cfg)
        batch = make_batch(dataset.items, dataset.bundles, cfg)
        probs = forward(batch, encode(batch, cfg, params), cfg, params).data
        assert probs.shape == (len(dataset.items), len(ANSWER_VOCAB))
        np.testing.assert_allclose(probs.sum(axis=1), np.ones(len(dataset.items)))

    def test_eval_is_pure(self, tiny):
        """Test repeated eval passes agree bitwise and leave parameters untouched"""
        cfg, dataset = tiny
        params = init_params(cfg)
        before = {name: p.data.copy() for name, p in params.items()}
        a = predict_proba(params, cfg, dataset.items, dataset.bundles)
        b = predict_proba(params, cfg, dataset.items, dataset.bundles)
        assert a.tobytes() == b.tobytes()
        for name, p in params.items():
            np.testing.assert_array_equal(p.data, before[name])

    def test_batching_does_not_change_output(self, tiny):
        """Test padding to the batch maximum does not leak into the probabilities"""
        cfg, dataset = tiny
        params = init_params(cfg)
        together = predict_proba(params, cfg, dataset.items, dataset.bundles)
        alone = predict_proba(params, cfg, dataset.items, dataset.bundles, batch_size=1)
        np.testing.assert_allclose(together, alone, atol=1e-12)

    def test_object_order_irrelevant(self, tiny):
        """Test permuting the object rows leaves the output unchanged"""
        cfg, dataset = tiny
        params = init_params(cfg)
        item = dataset.items[0]
        bundle = dataset.bundles[item.image_id]
        order = np.arange(bundle.object_count)[::-1]
        permuted = FeatureBundle(detection=bundle.detection[order], spatial=bundle.spatial,
                                 bbox=bundle.bbox[order], flags=bundle.flags)
        a = predict_proba(params, cfg, [item], dataset.bundles)
        b = predict_proba(params, cfg, [item], {item.image_id: permuted})
        np.testing.assert_allclose(a, b, atol=1e-12)

    def test_spatial_model_needs_spatial_features(self, tiny):
        """Test a spatial model on bundles without a grid raises ContractError"""
        cfg, dataset = tiny
        stripped = {
            image_id: FeatureBundle(detection=b.raw_detection, spatial=None, bbox=b.bbox,
                                    flags=b.flags.model_copy(update={"use_spatial": False, "use_bbox_position": False,
                                                                     "use_bbox_size": False}))
            for image_id, b in dataset.bundles.items()
        }
        with pytest.raises(ContractError):
            make_batch(dataset.items, stripped, cfg)

    def test_batch_flag_mismatch(self, tiny):
        """Test a batch built for one flag set is rejected by another"""
        cfg, dataset = tiny
        batch = make_batch(dataset.items, dataset.bundles, cfg.model_copy(update={"use_spatial": False}))
        params = init_params(cfg)
        with pytest.raises(ContractError):
            forward(batch, encode(batch, cfg, params), cfg, params)

    def test_empty_batch(self, tiny):
        """Test batching nothing raises InputError"""
        cfg, dataset = tiny
        with pytest.raises(InputError):
            make_batch([], dataset.bundles, cfg)

    def test_locked_masks_seen_in_train_mode(self, tiny):
        """Test the Bayesian encoder reports identical masks at every step"""
        cfg, dataset = tiny
        params = init_params(cfg)
        batch = make_batch(dataset.items[:2], dataset.bundles, cfg)
        seen = []
        encode(batch, cfg, params, "train", np.random.default_rng(0), on_step=lambda t, masks: seen.append(masks))
        assert seen
        assert all(np.array_equal(m[0].m_x, seen[0][0].m_x) for m in seen[: batch.question_ids.shape[1]])

    def test_plain_gru_ignores_train_mode(self, tiny):
        """Test the plain GRU encoder is deterministic in train mode"""
        cfg, dataset = tiny
        cfg = cfg.model_copy(update={"encoder_kind": EncoderKind.GRU})
        params = init_params(cfg)
        batch = make_batch(dataset.items, dataset.bundles, cfg)
        a = encode(batch, cfg, params, "train", np.random.default_rng(0)).joint.data
        b = encode(batch, cfg, params, "eval").joint.data
        assert a.tobytes() == b.tobytes()

    def test_quality_changes_features_not_shapes(self, tiny):
        """Test re-synthesised features keep the model inputs' shapes"""
        cfg, dataset = tiny
        low = requality(dataset, "low")
        a = make_batch(dataset.items, dataset.bundles, cfg)
        b = make_batch(dataset.items, low, cfg)
        assert a.objects.shape == b.objects.shape
        assert not np.array_equal(a.objects, b.objects)


class TestModelGradients:
    """Central differences through the whole network"""

    def test_model_within_tolerance(self):
        """Test sampled entries of every tensor pass the gradient check"""
        fn, params = model_case(0)
        errors = check_gradients(fn, params, np.random.default_rng(0), samples=3)
        assert max(errors.values()) < TOLERANCE


class TestCheckpoint:
    """Versioned JSON checkpoints"""

    @pytest.fixture
    def saved(self, tiny, tmp_path):
        cfg, _ = tiny
        path = str(tmp_path / "checkpoint.json")
        save_checkpoint(init_params(cfg), cfg, path, seed=0)
        return path

    def test_load_then_save_is_byte_identical(self, saved, tmp_path):
        """Test a loaded checkpoint writes back the same bytes"""
        again = str(tmp_path / "again.json")
        write_checkpoint(load_checkpoint(saved), again)
        with open(saved, "rb") as a, open(again, "rb") as b:
            assert a.read() == b.read()

    def test_round_trip_preserves_predictions(self, tiny, saved):
        """Test the loaded tensors reproduce the probabilities exactly"""
        cfg, dataset = tiny
        checkpoint = load_checkpoint(saved)
        params = init_params(cfg)
        a = predict_proba(params, cfg, dataset.items, dataset.bundles)
        b = predict_proba(params_from_checkpoint(checkpoint), checkpoint.config, dataset.items, dataset.bundles)
        assert a.tobytes() == b.tobytes()

    def test_version_mismatch(self, saved):
        """Test another format version raises CheckpointVersionError"""
        record = read_json(saved)
        record["version"] = 99
        write_json(saved, record)
        with pytest.raises(CheckpointVersionError):
            load_checkpoint(saved)

    def test_fingerprint_mismatch(self, saved):
        """Test another answer vocabulary raises CheckpointFingerprintError"""
        record = read_json(saved)
        record["vocab_fingerprint"] = "0" * 16
        write_json(saved, record)
        with pytest.raises(CheckpointFingerprintError):
            load_checkpoint(saved)

    def test_shape_mismatch_names_tensor(self, saved):
        """Test a wrongly shaped tensor raises CheckpointShapeError naming it"""
        record = read_json(saved)
        entry = record["tensors"]["joint.b"]
        entry["shape"] = [len(entry["values"]) + 1]
        write_json(saved, record)
        with pytest.raises(CheckpointShapeError) as exc:
            load_checkpoint(saved)
        assert exc.value.tensor == "joint.b"

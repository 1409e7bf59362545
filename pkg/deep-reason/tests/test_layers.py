"""
Tests for the GRU, locked dropout and attention layers
"""
import pytest
import numpy as np
import sys
import os

# Add parent directory to path
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from errors import DimensionError, InputError, ParameterError, VocabularyIndexError
from models import autodiff as ad
from models.autodiff import Tensor
from models.layers import (
    AttentionParams,
    GruParams,
    attention_pool,
    attention_shapes,
    bayesian_gru_encode,
    embed,
    glorot_uniform,
    gru_cell,
    gru_encode,
    gru_shapes,
    init_attention_params,
    init_gru_params,
    sample_locked_masks,
)
from utils.gradcheck import TOLERANCE, check_gradients, layer_cases

E, H = 3, 4


def _zero_gru():
    return GruParams(**{name: Tensor(np.zeros(shape)) for name, shape in gru_shapes(E, H).items()})


@pytest.fixture
def gru():
    return init_gru_params(E, H, np.random.default_rng(0))


@pytest.fixture
def tokens():
    return Tensor(np.random.default_rng(1).standard_normal((2, 5, E)))


class TestInitialisation:
    """Glorot-uniform weights and zero biases"""

    def test_glorot_bound(self):
        """Test values stay within sqrt(6 / (fan_in + fan_out))"""
        values = glorot_uniform((30, 20), np.random.default_rng(0))
        assert np.abs(values).max() <= np.sqrt(6.0 / 50.0)

    def test_biases_zero(self, gru):
        """Test GRU biases start at zero"""
        for name in ("b_z", "b_r", "b_h"):
            np.testing.assert_array_equal(getattr(gru, name).data, np.zeros(H))

    def test_seeded(self):
        """Test the same generator seed gives identical weights"""
        a = init_gru_params(E, H, np.random.default_rng(5))
        b = init_gru_params(E, H, np.random.default_rng(5))
        np.testing.assert_array_equal(a.W_z.data, b.W_z.data)
        np.testing.assert_array_equal(a.U_h.data, b.U_h.data)


class TestGruCell:
    """Single GRU step"""

    def test_matches_equations(self, gru):
        """Test the gate equations on a single vector"""
        rng = np.random.default_rng(2)
        x, h = rng.standard_normal(E), rng.standard_normal(H)

        def sigmoid(v):
            return 1.0 / (1.0 + np.exp(-v))
        z = sigmoid(x @ gru.W_z.data + h @ gru.U_z.data)
        r = sigmoid(x @ gru.W_r.data + h @ gru.U_r.data)
        candidate = np.tanh(x @ gru.W_h.data + (r * h) @ gru.U_h.data)
        expected = (1 - z) * h + z * candidate
        np.testing.assert_allclose(gru_cell(Tensor(x), Tensor(h), gru).data, expected)

    def test_zero_parameters_keep_zero_state(self):
        """Test all-zero weights map a zero state to zero whatever the input"""
        zero = _zero_gru()
        out = gru_cell(Tensor(np.random.default_rng(4).standard_normal(E)), Tensor(np.zeros(H)), zero)
        np.testing.assert_array_equal(out.data, np.zeros(H))

    def test_closed_update_gate_carries_state(self):
        """Test b_z = -100 shuts the update gate and the state passes through"""
        params = _zero_gru()
        params.b_z.data[:] = -100.0
        h = np.array([0.3, -0.7, 1.2, 0.0])
        out = gru_cell(Tensor(np.ones(E)), Tensor(h), params)
        np.testing.assert_allclose(out.data, h, atol=1e-12)

    def test_batched_rows(self, gru):
        """Test a batch of rows gives one state per row"""
        out = gru_cell(Tensor(np.ones((3, E))), Tensor(np.zeros((3, H))), gru)
        assert out.shape == (3, H)

    def test_dimension_mismatch(self, gru):
        """Test wrong input width raises DimensionError"""
        with pytest.raises(DimensionError):
            gru_cell(Tensor(np.ones(E + 1)), Tensor(np.zeros(H)), gru)


class TestLockedMasks:
    """Variational dropout masks"""

    def test_entries(self):
        """Test every entry is 0 or 1 / (1 - p)"""
        masks = sample_locked_masks(50, 60, 0.25, np.random.default_rng(0))
        for m in (masks.m_x, masks.m_h):
            assert set(np.unique(m)) <= {0.0, 1.0 / 0.75}

    def test_deterministic_per_seed(self):
        """Test equal seeds give equal masks"""
        a = sample_locked_masks(E, H, 0.5, np.random.default_rng(3))
        b = sample_locked_masks(E, H, 0.5, np.random.default_rng(3))
        np.testing.assert_array_equal(a.m_x, b.m_x)
        np.testing.assert_array_equal(a.m_h, b.m_h)

    def test_unbiased(self):
        """Test the mask mean is close to one"""
        masks = sample_locked_masks(200000, 1, 0.25, np.random.default_rng(0))
        assert masks.m_x.mean() == pytest.approx(1.0, abs=0.01)

    def test_rate_zero_is_all_ones(self):
        """Test p = 0 keeps every unit at scale one"""
        masks = sample_locked_masks(E, H, 0.0, np.random.default_rng(0))
        np.testing.assert_array_equal(masks.m_x, np.ones(E))
        np.testing.assert_array_equal(masks.m_h, np.ones(H))

    def test_half_rate_drops_half(self):
        """Test p = 0.5 zeroes between 48 and 52 percent of 10 000 entries"""
        masks = sample_locked_masks(10000, 1, 0.5, np.random.default_rng(0))
        assert 0.48 <= float((masks.m_x == 0.0).mean()) <= 0.52
        assert set(np.unique(masks.m_x)) <= {0.0, 2.0}

    @pytest.mark.parametrize("rate", [-0.1, 1.0, 1.5])
    def test_rate_out_of_range(self, rate):
        """Test rates outside [0, 1) raise ParameterError"""
        with pytest.raises(ParameterError):
            sample_locked_masks(E, H, rate, np.random.default_rng(0))


class TestEncoders:
    """Plain and Bayesian GRU encoders"""

    def test_masks_locked_across_timesteps(self, gru, tokens):
        """Test on_step sees the same masks at every step"""
        seen = []
        bayesian_gru_encode(tokens, gru, 0.25, np.random.default_rng(0), "train",
                            on_step=lambda t, masks: seen.append((t, masks)))
        assert [t for t, _ in seen] == list(range(5))
        first = seen[0][1]
        for _, masks in seen[1:]:
            for a, b in zip(first, masks):
                np.testing.assert_array_equal(a.m_x, b.m_x)
                np.testing.assert_array_equal(a.m_h, b.m_h)

    def test_one_mask_pair_per_sequence(self, gru, tokens):
        """Test a batch of two sequences draws two mask pairs"""
        seen = []
        bayesian_gru_encode(tokens, gru, 0.25, np.random.default_rng(0), "train",
                            on_step=lambda t, masks: seen.append(masks))
        assert len(seen[0]) == 2

    def test_rate_zero_equals_plain(self, gru, tokens):
        """Test the Bayesian GRU at rate 0 is bitwise the plain GRU"""
        plain = gru_encode(tokens, gru).data
        bayes = bayesian_gru_encode(tokens, gru, 0.0, np.random.default_rng(9), "train").data
        assert plain.tobytes() == bayes.tobytes()

    def test_eval_mode_is_identity(self, gru, tokens):
        """Test eval mode ignores the dropout rate"""
        plain = gru_encode(tokens, gru).data
        evaluated = bayesian_gru_encode(tokens, gru, 0.5, None, "eval").data
        assert plain.tobytes() == evaluated.tobytes()

    def test_train_mode_needs_rng(self, gru, tokens):
        """Test train mode without a generator raises ParameterError"""
        with pytest.raises(ParameterError):
            bayesian_gru_encode(tokens, gru, 0.25, None, "train")

    def test_padded_steps_carry_state(self, gru):
        """Test a shorter sequence in a batch ends at its own length"""
        rng = np.random.default_rng(4)
        short = rng.standard_normal((3, E))
        padded = np.concatenate([short, rng.standard_normal((2, E))])
        batch = Tensor(np.stack([padded, padded]))
        out = gru_encode(batch, gru, lengths=[3, 5]).data
        np.testing.assert_allclose(out[0], gru_encode(Tensor(short), gru).data)
        np.testing.assert_allclose(out[1], gru_encode(Tensor(padded), gru).data)

    def test_empty_sequence(self, gru):
        """Test a zero-length sequence raises InputError"""
        with pytest.raises(InputError):
            gru_encode(Tensor(np.zeros((0, E))), gru)


class TestAttention:
    """Additive attention pooling"""

    @pytest.fixture
    def attention(self):
        return init_attention_params(E, H, 6, np.random.default_rng(0))

    def test_weights_form_distribution(self, attention):
        """Test weights are non-negative and sum to one"""
        rng = np.random.default_rng(1)
        pooled, weights = attention_pool(Tensor(rng.standard_normal((5, E))), Tensor(rng.standard_normal(H)),
                                         attention)
        assert pooled.shape == (E,)
        assert np.all(weights.data >= 0.0)
        assert weights.data.sum() == pytest.approx(1.0)

    def test_masked_objects_get_zero_weight(self, attention):
        """Test masked rows do not contribute"""
        rng = np.random.default_rng(2)
        values = rng.standard_normal((2, 4, E))
        mask = np.array([[1, 1, 0, 0], [1, 1, 1, 1]])
        pooled, weights = attention_pool(Tensor(values), Tensor(rng.standard_normal((2, H))), attention, mask)
        np.testing.assert_array_equal(weights.data[0, 2:], [0.0, 0.0])
        assert weights.data[0].sum() == pytest.approx(1.0)

    def test_permutation_invariant(self, attention):
        """Test reordering the values leaves the pooled vector unchanged"""
        rng = np.random.default_rng(3)
        values, query = rng.standard_normal((5, E)), rng.standard_normal(H)
        order = [3, 0, 4, 1, 2]
        a, _ = attention_pool(Tensor(values), Tensor(query), attention)
        b, _ = attention_pool(Tensor(values[order]), Tensor(query), attention)
        np.testing.assert_allclose(a.data, b.data)

    def test_single_value_pools_to_itself(self, attention):
        """Test one object gets weight one and the pooled vector is that object"""
        value = np.array([[0.4, -1.1, 2.5]])
        pooled, weights = attention_pool(Tensor(value), Tensor(np.ones(H)), attention)
        np.testing.assert_allclose(weights.data, [1.0])
        np.testing.assert_allclose(pooled.data, value[0])

    def test_zero_parameters_give_mean_pool(self):
        """Test all-zero attention weights average the values uniformly"""
        zero = AttentionParams(**{name: Tensor(np.zeros(shape)) for name, shape in attention_shapes(E, H, 6).items()})
        values = np.random.default_rng(5).standard_normal((4, E))
        pooled, weights = attention_pool(Tensor(values), Tensor(np.ones(H)), zero)
        np.testing.assert_allclose(weights.data, np.full(4, 0.25))
        np.testing.assert_allclose(pooled.data, values.mean(axis=0))

    def test_no_values(self, attention):
        """Test an empty value set raises InputError"""
        with pytest.raises(InputError):
            attention_pool(Tensor(np.zeros((0, E))), Tensor(np.zeros(H)), attention)

    def test_wrong_width(self, attention):
        """Test values of the wrong width raise DimensionError"""
        with pytest.raises(DimensionError):
            attention_pool(Tensor(np.zeros((3, E + 2))), Tensor(np.zeros(H)), attention)


class TestEmbedding:
    """Embedding lookup"""

    def test_out_of_vocabulary(self):
        """Test an id past the table raises VocabularyIndexError"""
        with pytest.raises(VocabularyIndexError):
            embed(np.array([0, 6]), Tensor(np.zeros((6, 2)), requires_grad=True))

    def test_gradient_touches_used_rows(self):
        """Test rows not looked up keep zero gradient"""
        table = Tensor(np.ones((5, 2)), requires_grad=True)
        ad.backward(ad.tensor_sum(embed(np.array([0, 2]), table)))
        np.testing.assert_array_equal(table.grad[[1, 3, 4]], np.zeros((3, 2)))
        np.testing.assert_array_equal(table.grad[[0, 2]], np.ones((2, 2)))


class TestLayerGradients:
    """Central-difference check of every layer"""

    @pytest.mark.parametrize("seed", [0, 1])
    def test_layers_within_tolerance(self, seed):
        """Test GRU, Bayesian GRU, attention and embedding gradients"""
        sampler = np.random.default_rng(seed)
        for name, (fn, params) in layer_cases(seed).items():
            errors = check_gradients(fn, params, sampler)
            assert max(errors.values()) < TOLERANCE, name

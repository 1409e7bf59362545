"""
Central-difference gradient checking for the tensor ops, the layers and the full model
"""
import logging
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from models import autodiff as ad
from models.autodiff import Tensor
from models.layers import (
    attention_pool,
    bayesian_gru_encode,
    embed,
    gru_cell,
    gru_encode,
    init_attention_params,
    init_gru_params,
)
from models.reason_net import init_params, loss, make_batch
from schemas.config import ModelConfig
from schemas.world import WorldConfig
from utils.dataset import generate_dataset
from utils.seeding import derive_rng

logger = logging.getLogger(__name__)

STEP = 1e-5
TOLERANCE = 1e-4

Loss = Callable[[], Tensor]


def relative_error(analytic: float, numeric: float) -> float:
    return abs(analytic - numeric) / max(1.0, abs(analytic))


def check_gradients(loss_fn: Loss, params: Dict[str, Tensor], rng: Optional[np.random.Generator] = None,
                    samples: Optional[int] = None, h: float = STEP) -> Dict[str, float]:
    """Max relative error per tensor between backward and central differences.

    `loss_fn` must rebuild the graph on every call and be deterministic.
    With `samples`, only that many random entries of each tensor are checked.
    """
    ad.zero_grad(params.values())
    ad.backward(loss_fn())
    analytic = {name: p.grad.copy() for name, p in params.items()}

    errors = {}
    for name, p in params.items():
        flat = p.data.reshape(-1)
        indices = np.arange(flat.size)
        if samples is not None and flat.size > samples:
            indices = np.sort((rng or np.random.default_rng(0)).choice(flat.size, samples, replace=False))
        worst = 0.0
        for i in indices:
            original = flat[i]
            flat[i] = original + h
            plus = loss_fn().item()
            flat[i] = original - h
            minus = loss_fn().item()
            flat[i] = original
            numeric = (plus - minus) / (2.0 * h)
            worst = max(worst, relative_error(float(analytic[name].reshape(-1)[i]), numeric))
        errors[name] = worst
    return errors


def _leaf(rng: np.random.Generator, *shape, low: float = -1.0, high: float = 1.0) -> Tensor:
    return Tensor(rng.uniform(low, high, size=shape), requires_grad=True)


def _away_from_zero(rng: np.random.Generator, *shape) -> Tensor:
    """Entries in [-1, -0.1] or [0.1, 1] so relu kinks stay outside the finite-difference step"""
    magnitude = rng.uniform(0.1, 1.0, size=shape)
    return Tensor(magnitude * rng.choice([-1.0, 1.0], size=shape), requires_grad=True)


def op_cases(seed: int) -> Dict[str, Tuple[Loss, Dict[str, Tensor]]]:
    """Scalar losses over every differentiable primitive"""
    rng = derive_rng(seed, "gradcheck", "ops")
    a, b = _leaf(rng, 3, 4), _leaf(rng, 4, 5)
    batched = _leaf(rng, 2, 3, 4)
    x, y = _leaf(rng, 3, 4), _leaf(rng, 3, 4)
    k = _away_from_zero(rng, 3, 4)
    positive = _leaf(rng, 3, 4, low=0.5, high=2.0)
    logits_in = _leaf(rng, 4, 6)
    table = _leaf(rng, 7, 3)
    targets = rng.integers(0, 6, size=4)
    ids = np.array([1, 3, 3, 6])
    weights = {name: rng.standard_normal(shape) for name, shape in
               (("mm", (3, 5)), ("bmm", (2, 3, 5)), ("ew", (3, 4)), ("sm", (3, 4)), ("cat", (3, 8)),
                ("rows", (4, 3)), ("take", (2, 4)))}

    def w(name):
        return Tensor(weights[name])

    return {
        "matmul": (lambda: ad.tensor_sum(ad.matmul(a, b) * w("mm")), {"a": a, "b": b}),
        "matmul_batched": (lambda: ad.tensor_sum(ad.matmul(batched, b) * w("bmm")), {"a": batched, "b": b}),
        "elementwise": (
            lambda: ad.tensor_sum((x * y + x - y * 0.5 - (-x)) * w("ew")),
            {"x": x, "y": y},
        ),
        "sigmoid_tanh": (lambda: ad.tensor_sum((ad.sigmoid(x) + ad.tanh(y)) * w("ew")), {"x": x, "y": y}),
        "relu": (lambda: ad.tensor_sum(ad.relu(k) * w("ew")), {"k": k}),
        "exp_log": (lambda: ad.tensor_sum((ad.exp(x) + ad.log(positive)) * w("ew")), {"x": x, "p": positive}),
        "softmax": (lambda: ad.tensor_sum(ad.softmax(x, axis=1) * w("sm")), {"x": x}),
        "concat": (lambda: ad.tensor_sum(ad.concat([x, y], axis=1) * w("cat")), {"x": x, "y": y}),
        "take_reshape": (
            lambda: ad.tensor_sum(ad.reshape(x[1:3], (2, 4)) * w("take")) + ad.mean(y, axis=0).sum(),
            {"x": x, "y": y},
        ),
        "gather_rows": (lambda: ad.tensor_sum(ad.gather_rows(table, ids) * w("rows")), {"table": table}),
        "cross_entropy": (lambda: ad.cross_entropy(logits_in, targets), {"logits": logits_in}),
    }


def layer_cases(seed: int) -> Dict[str, Tuple[Loss, Dict[str, Tensor]]]:
    rng = derive_rng(seed, "gradcheck", "layers")
    embed_dim, hidden, steps = 3, 4, 5
    gru = init_gru_params(embed_dim, hidden, rng)
    gru_named = gru.named("gru")
    x_t, h_prev = _leaf(rng, 2, embed_dim), _leaf(rng, 2, hidden)
    tokens = _leaf(rng, 2, steps, embed_dim)
    lengths = [steps, 3]
    table = _leaf(rng, 6, embed_dim)
    token_ids = np.array([2, 5, 2, 0])
    attention = init_attention_params(embed_dim, hidden, 4, rng)
    values, query = _leaf(rng, 2, 3, embed_dim), _leaf(rng, 2, hidden)
    mask = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 1.0]])
    r_h = Tensor(rng.standard_normal((2, hidden)))
    r_v = Tensor(rng.standard_normal((2, embed_dim)))
    r_e = Tensor(rng.standard_normal((4, embed_dim)))

    def bayesian():
        out = bayesian_gru_encode(tokens, gru, 0.25, derive_rng(seed, "gradcheck", "masks"), "train", lengths)
        return ad.tensor_sum(out * r_h)

    def pooled():
        out, weights = attention_pool(values, query, attention, mask)
        return ad.tensor_sum(out * r_v) + ad.tensor_sum(weights * weights)

    return {
        "gru_cell": (lambda: ad.tensor_sum(gru_cell(x_t, h_prev, gru) * r_h),
                     {**gru_named, "x": x_t, "h": h_prev}),
        "gru_encode": (lambda: ad.tensor_sum(gru_encode(tokens, gru, lengths) * r_h), {**gru_named, "tokens": tokens}),
        "bayesian_gru_encode": (bayesian, {**gru_named, "tokens": tokens}),
        "attention_pool": (pooled, {**attention.named("attention"), "values": values, "query": query}),
        "embed": (lambda: ad.tensor_sum(embed(token_ids, table) * r_e), {"table": table}),
    }


def tiny_model_config(seed: int = 0) -> Tuple[ModelConfig, WorldConfig]:
    """Smallest dimensions the feature synthesis allows"""
    world = WorldConfig(width=64, height=64, min_objects=3, max_objects=4, min_sep=12.0, min_axis_gap=2.0,
                        small_side=(6, 8), large_side=(10, 12), detection_dim=13, grid_size=4, spatial_dim=13)
    cfg = ModelConfig(embed_dim=4, hidden_dim=5, query_dim=6, attention_dim=4, detection_dim=13, grid_size=4,
                      spatial_dim=13, mlp_hidden=8, seed=seed)
    return cfg, world


def model_case(seed: int) -> Tuple[Loss, Dict[str, Tensor]]:
    """Cross-entropy of the full network on a two-item batch"""
    cfg, world = tiny_model_config(seed)
    # odd seeds also cover the cell coordinate columns
    cfg = cfg.model_copy(update={"spatial_coords": seed % 2 == 1})
    dataset = generate_dataset(num_images=2, questions_per_image=1, seed=seed, world=world)
    batch = make_batch(dataset.items, dataset.bundles, cfg)
    params = init_params(cfg)

    def fn():
        return loss(batch, cfg, params, "train", derive_rng(seed, "gradcheck", "dropout"))[0]
    return fn, params


def run_gradcheck(seeds: int = 20, samples: int = 6) -> Dict[str, float]:
    """Worst relative error per check over `seeds` seeds"""
    worst: Dict[str, float] = {}
    for seed in range(seeds):
        cases = {**op_cases(seed), **layer_cases(seed), "model": model_case(seed)}
        sampler = derive_rng(seed, "gradcheck", "entries")
        for name, (fn, params) in cases.items():
            errors = check_gradients(fn, params, sampler, samples if name == "model" else None)
            worst[name] = max(worst.get(name, 0.0), max(errors.values()))
    logger.info(f"Gradient check over {seeds} seeds: max relative error {max(worst.values()):.3e}")
    return worst

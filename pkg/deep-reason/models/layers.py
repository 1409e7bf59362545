"""
Embedding, GRU, locked-dropout (Bayesian) GRU and attention pooling
"""
from typing import Callable, Dict, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, model_validator, validator

from errors import DimensionError, InputError, ParameterError
from models import autodiff as ad
from models.autodiff import Tensor

DEFAULT_DROPOUT_RATE = 0.25

# Large negative score given to padded objects before the softmax
MASKED_SCORE = -1e9


class GruParams(BaseModel):
    """Input (E x H), recurrent (H x H) and bias (H) weights of one GRU"""
    W_z: Tensor
    W_r: Tensor
    W_h: Tensor
    U_z: Tensor
    U_r: Tensor
    U_h: Tensor
    b_z: Tensor
    b_r: Tensor
    b_h: Tensor

    class Config:
        arbitrary_types_allowed = True

    @property
    def input_size(self) -> int:
        return self.W_z.shape[0]

    @property
    def hidden_size(self) -> int:
        return self.W_z.shape[1]

    @model_validator(mode="after")
    def check_dimensions(self):
        e, h = self.W_z.shape
        for name in ("W_z", "W_r", "W_h"):
            if getattr(self, name).shape != (e, h):
                raise ValueError(f"{name} must be {e}x{h}")
        for name in ("U_z", "U_r", "U_h"):
            if getattr(self, name).shape != (h, h):
                raise ValueError(f"{name} must be {h}x{h}")
        for name in ("b_z", "b_r", "b_h"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"{name} must have length {h}")
        return self

    def named(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.{name}": getattr(self, name) for name in GRU_FIELDS}

    @classmethod
    def from_named(cls, params: Dict[str, Tensor], prefix: str) -> "GruParams":
        return cls(**{name: params[f"{prefix}.{name}"] for name in GRU_FIELDS})


GRU_FIELDS = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")


class LockedMasks(BaseModel):
    """One input mask and one recurrent mask, reused at every timestep"""
    m_x: np.ndarray
    m_h: np.ndarray
    rate: float

    class Config:
        arbitrary_types_allowed = True

    @validator("rate")
    def validate_rate(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError("rate must lie in [0, 1)")
        return v


class AttentionParams(BaseModel):
    """Additive attention: W_v (D x A), W_q (Q x A) and scoring vector w (A)"""
    W_v: Tensor
    W_q: Tensor
    w: Tensor

    class Config:
        arbitrary_types_allowed = True

    @model_validator(mode="after")
    def check_dimensions(self):
        a = self.w.shape[0] if self.w.ndim == 1 else -1
        if self.W_v.ndim != 2 or self.W_q.ndim != 2 or self.W_v.shape[1] != a or self.W_q.shape[1] != a:
            raise ValueError("W_v, W_q and w must share the attention width A")
        return self

    def named(self, prefix: str) -> Dict[str, Tensor]:
        return {f"{prefix}.{name}": getattr(self, name) for name in ATTENTION_FIELDS}

    @classmethod
    def from_named(cls, params: Dict[str, Tensor], prefix: str) -> "AttentionParams":
        return cls(**{name: params[f"{prefix}.{name}"] for name in ATTENTION_FIELDS})


ATTENTION_FIELDS = ("W_v", "W_q", "w")


# Initialisation

def glorot_uniform(shape: Tuple[int, ...], rng: np.random.Generator) -> np.ndarray:
    """uniform(-a, a) with a = sqrt(6 / (fan_in + fan_out))"""
    fan_in = shape[0]
    fan_out = shape[1] if len(shape) > 1 else 1
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def gru_shapes(input_size: int, hidden_size: int) -> Dict[str, Tuple[int, ...]]:
    shapes = {}
    for gate in ("z", "r", "h"):
        shapes[f"W_{gate}"] = (input_size, hidden_size)
        shapes[f"U_{gate}"] = (hidden_size, hidden_size)
        shapes[f"b_{gate}"] = (hidden_size,)
    return shapes


def attention_shapes(value_size: int, query_size: int, attention_size: int) -> Dict[str, Tuple[int, ...]]:
    return {"W_v": (value_size, attention_size), "W_q": (query_size, attention_size), "w": (attention_size,)}


def init_tensor(name: str, shape: Tuple[int, ...], rng: np.random.Generator) -> Tensor:
    """Biases (names starting with b) start at zero, everything else Glorot-uniform"""
    leaf = name.rsplit(".", 1)[-1]
    if leaf.startswith("b"):
        values = np.zeros(shape)
    else:
        values = glorot_uniform(shape, rng)
    return Tensor(values, requires_grad=True)


def init_gru_params(input_size: int, hidden_size: int, rng: np.random.Generator) -> GruParams:
    shapes = gru_shapes(input_size, hidden_size)
    return GruParams(**{name: init_tensor(name, shapes[name], rng) for name in GRU_FIELDS})


def init_attention_params(value_size: int, query_size: int, attention_size: int,
                          rng: np.random.Generator) -> AttentionParams:
    shapes = attention_shapes(value_size, query_size, attention_size)
    return AttentionParams(**{name: init_tensor(name, shapes[name], rng) for name in ATTENTION_FIELDS})


# Layers

def embed(token_ids, table: Tensor) -> Tensor:
    """Look up embedding rows; the gradient only touches the rows used"""
    return ad.gather_rows(table, token_ids)


def gru_cell(x: Tensor, h: Tensor, params: GruParams) -> Tensor:
    """One GRU step on a vector (E) / (H) or on a batch of rows (B x E) / (B x H)"""
    if x.shape[-1] != params.input_size or h.shape[-1] != params.hidden_size:
        raise DimensionError(
            f"gru_cell: got x {x.shape} and h {h.shape} for E={params.input_size}, H={params.hidden_size}"
        )
    z = ad.sigmoid(x @ params.W_z + h @ params.U_z + params.b_z)
    r = ad.sigmoid(x @ params.W_r + h @ params.U_r + params.b_r)
    candidate = ad.tanh(x @ params.W_h + (r * h) @ params.U_h + params.b_h)
    return (1.0 - z) * h + z * candidate


def sample_locked_masks(input_size: int, hidden_size: int, rate: float,
                        rng: np.random.Generator) -> LockedMasks:
    """Inverted-dropout masks: 0 with probability `rate`, else 1 / (1 - rate)"""
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"Dropout rate must lie in [0, 1), got {rate}")
    scale = 1.0 / (1.0 - rate)
    m_x = np.where(rng.random(input_size) >= rate, scale, 0.0)
    m_h = np.where(rng.random(hidden_size) >= rate, scale, 0.0)
    return LockedMasks(m_x=m_x, m_h=m_h, rate=rate)


StepObserver = Callable[[int, Sequence[LockedMasks]], None]


def _run_gru(tokens: Tensor, params: GruParams, lengths: Optional[Sequence[int]],
             masks: Optional[Sequence[LockedMasks]], on_step: Optional[StepObserver]) -> Tensor:
    single = tokens.ndim == 2
    if single:
        tokens = ad.reshape(tokens, (1,) + tokens.shape)
    if tokens.ndim != 3:
        raise DimensionError(f"GRU input must be T x E or B x T x E, got {tokens.shape}")
    batch, steps, _ = tokens.shape
    if steps == 0:
        raise InputError("Cannot encode an empty sequence")
    if lengths is None:
        lengths = np.full(batch, steps)
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.shape != (batch,) or lengths.min() < 1 or lengths.max() > steps:
        raise InputError(f"Sequence lengths {lengths.tolist()} invalid for {steps} steps")

    m_x = m_h = None
    if masks is not None:
        m_x = np.stack([m.m_x for m in masks])
        m_h = np.stack([m.m_h for m in masks])

    h = Tensor(np.zeros((batch, params.hidden_size)))
    ragged = bool((lengths < steps).any())
    for t in range(steps):
        x_t = tokens[:, t, :]
        h_in = h
        if masks is not None:
            if on_step is not None:
                on_step(t, masks)
            x_t = ad.dropout(x_t, m_x)
            h_in = ad.dropout(h, m_h)
        h_new = gru_cell(x_t, h_in, params)
        if ragged:
            alive = (t < lengths).astype(np.float64)[:, None]
            h = h_new * alive + h * (1.0 - alive)
        else:
            h = h_new
    if single:
        h = ad.reshape(h, (params.hidden_size,))
    return h


def gru_encode(tokens: Tensor, params: GruParams, lengths: Optional[Sequence[int]] = None) -> Tensor:
    """Plain GRU encoder: final hidden state of T x E (or each row of B x T x E)"""
    return _run_gru(tokens, params, lengths, None, None)


def bayesian_gru_encode(tokens: Tensor, params: GruParams, rate: float, rng: Optional[np.random.Generator],
                        mode: str = "train", lengths: Optional[Sequence[int]] = None,
                        on_step: Optional[StepObserver] = None) -> Tensor:
    """GRU with locked variational dropout on the input and recurrent connections.

    In train mode one LockedMasks pair is drawn per sequence and applied at
    every timestep; in eval mode the masks are the identity and this is
    exactly gru_encode. `on_step(t, masks)` sees the masks used at step t.
    """
    if mode not in ("train", "eval"):
        raise ParameterError(f"Unknown mode {mode!r}")
    if not 0.0 <= rate < 1.0:
        raise ParameterError(f"Dropout rate must lie in [0, 1), got {rate}")
    if mode == "eval":
        return _run_gru(tokens, params, lengths, None, None)
    if rng is None:
        raise ParameterError("Train mode needs a random generator for the dropout masks")
    batch = 1 if tokens.ndim == 2 else tokens.shape[0]
    masks = [sample_locked_masks(params.input_size, params.hidden_size, rate, rng) for _ in range(batch)]
    return _run_gru(tokens, params, lengths, masks, on_step)


def attention_pool(values: Tensor, query: Tensor, params: AttentionParams,
                   mask: Optional[np.ndarray] = None) -> Tuple[Tensor, Tensor]:
    """Additive attention: softmax(w . tanh(v_i W_v + q W_q)) weighted sum of the values.

    Accepts N x D values with a Q query, or B x N x D values with B x Q
    queries and an optional B x N validity mask.
    """
    single = values.ndim == 2
    if single:
        values = ad.reshape(values, (1,) + values.shape)
        query = ad.reshape(query, (1,) + query.shape)
    if values.ndim != 3 or query.ndim != 2 or values.shape[0] != query.shape[0]:
        raise DimensionError(f"attention_pool: values {values.shape} and query {query.shape} do not pair up")
    batch, count, width = values.shape
    if count == 0:
        raise InputError("attention_pool needs at least one value")
    if params.W_v.shape[0] != width or params.W_q.shape[0] != query.shape[1]:
        raise DimensionError(
            f"attention_pool: params expect D={params.W_v.shape[0]}, Q={params.W_q.shape[0]}, "
            f"got D={width}, Q={query.shape[1]}"
        )
    attention_size = params.w.shape[0]
    projected_query = ad.reshape(query @ params.W_q, (batch, 1, attention_size))
    hidden = ad.tanh(values @ params.W_v + projected_query)
    scores = ad.tensor_sum(hidden * params.w, axis=-1)
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64).reshape(batch, count)
        scores = scores + (1.0 - mask) * MASKED_SCORE
    weights = ad.softmax(scores, axis=-1)
    pooled = ad.tensor_sum(ad.reshape(weights, (batch, count, 1)) * values, axis=1)
    if single:
        return ad.reshape(pooled, (width,)), ad.reshape(weights, (count,))
    return pooled, weights

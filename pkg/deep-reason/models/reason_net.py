"""
The reason network: question and program encoders, detection and spatial
attention pipelines, and the answer classifier
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from errors import (
    CheckpointError,
    CheckpointFingerprintError,
    CheckpointShapeError,
    CheckpointVersionError,
    ContractError,
    InputError,
    ParameterError,
)
from models import autodiff as ad
from models.autodiff import Tensor
from models.layers import (
    AttentionParams,
    GruParams,
    attention_pool,
    attention_shapes,
    bayesian_gru_encode,
    embed,
    gru_encode,
    gru_shapes,
    init_tensor,
)
from schemas.checkpoint import CHECKPOINT_VERSION, Checkpoint
from schemas.config import EncoderKind, ModelConfig
from schemas.program import QAItem
from schemas.world import FeatureBundle, FeatureFlags
from storage import read_json, write_json
from utils.programs import serialize_program
from utils.seeding import derive_rng
from utils.vocab import (
    ANSWER_FINGERPRINT,
    PROGRAM_INDEX,
    PROGRAM_VOCAB,
    QUESTION_INDEX,
    QUESTION_VOCAB,
    answer_id,
    encode_tokens,
)

logger = logging.getLogger(__name__)

Params = Dict[str, Tensor]


# Parameters

def param_shapes(cfg: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    """Name -> shape of every tensor the config implies, in name order"""
    shapes: Dict[str, Tuple[int, ...]] = {
        "question.embedding": (len(QUESTION_VOCAB), cfg.embed_dim),
    }
    for name, shape in gru_shapes(cfg.embed_dim, cfg.hidden_dim).items():
        shapes[f"question.gru.{name}"] = shape
    if cfg.use_program:
        shapes["program.embedding"] = (len(PROGRAM_VOCAB), cfg.embed_dim)
        for name, shape in gru_shapes(cfg.embed_dim, cfg.hidden_dim).items():
            shapes[f"program.gru.{name}"] = shape
    shapes["joint.W"] = (2 * cfg.hidden_dim, cfg.query_dim)
    shapes["joint.b"] = (cfg.query_dim,)
    for name, shape in attention_shapes(cfg.detection_width, cfg.query_dim, cfg.attention_dim).items():
        shapes[f"det_attention.{name}"] = shape
    if cfg.use_spatial:
        for name, shape in attention_shapes(cfg.cell_width, cfg.query_dim, cfg.attention_dim).items():
            shapes[f"spatial_attention.{name}"] = shape
    shapes["classifier.W1"] = (cfg.classifier_width, cfg.mlp_hidden)
    shapes["classifier.b1"] = (cfg.mlp_hidden,)
    shapes["classifier.W2"] = (cfg.mlp_hidden, cfg.num_answers)
    shapes["classifier.b2"] = (cfg.num_answers,)
    return dict(sorted(shapes.items()))


def init_params(cfg: ModelConfig) -> Params:
    """Each tensor drawn from its own seed so flags only touch the tensors they govern"""
    return {
        name: init_tensor(name, shape, derive_rng(cfg.seed, name))
        for name, shape in param_shapes(cfg).items()
    }


GOVERNED = {
    "use_program": ("program.",),
    "use_spatial": ("spatial_attention.", "classifier.W1"),
    "use_bbox_position": ("det_attention.W_v", "classifier.W1"),
    "use_bbox_size": ("det_attention.W_v", "classifier.W1"),
    "spatial_coords": ("spatial_attention.W_v", "classifier.W1"),
    "encoder_kind": (),
}


def governed_parameters(flag: str, cfg: Optional[ModelConfig] = None) -> List[str]:
    """Names of the tensors whose presence or shape depends on `flag`"""
    if flag not in GOVERNED:
        raise ParameterError(f"Unknown model flag {flag!r}")
    cfg = cfg or ModelConfig()
    names = set(param_shapes(cfg))
    if flag != "encoder_kind":
        for value in (True, False):
            names |= set(param_shapes(cfg.model_copy(update={flag: value})))
    return sorted(n for n in names if any(n.startswith(prefix) for prefix in GOVERNED[flag]))


# Batching

class Batch(BaseModel):
    """Padded inputs of B items"""
    qids: List[str]
    question_ids: np.ndarray
    question_lengths: np.ndarray
    program_ids: np.ndarray
    program_lengths: np.ndarray
    objects: np.ndarray
    object_mask: np.ndarray
    cells: Optional[np.ndarray] = None
    targets: Optional[np.ndarray] = None

    class Config:
        arbitrary_types_allowed = True

    @property
    def size(self) -> int:
        return len(self.qids)


def _pad(sequences: Sequence[List[int]]) -> Tuple[np.ndarray, np.ndarray]:
    lengths = np.array([len(s) for s in sequences], dtype=np.int64)
    ids = np.zeros((len(sequences), int(lengths.max())), dtype=np.int64)
    for row, seq in enumerate(sequences):
        ids[row, : len(seq)] = seq
    return ids, lengths


def cell_coordinates(grid_size: int) -> np.ndarray:
    """G^2 x 2 normalised (x, y) cell centres in row-major cell order"""
    centres = (np.arange(grid_size) + 0.5) / grid_size
    ys, xs = np.meshgrid(centres, centres, indexing="ij")
    return np.stack([xs.ravel(), ys.ravel()], axis=1)


def flags_for(cfg: ModelConfig) -> FeatureFlags:
    return FeatureFlags(
        use_spatial=cfg.use_spatial,
        use_bbox_position=cfg.use_bbox_position,
        use_bbox_size=cfg.use_bbox_size,
    )


def _cells(bundle: FeatureBundle, cfg: ModelConfig) -> np.ndarray:
    expected = (cfg.grid_size, cfg.grid_size, cfg.spatial_dim)
    if bundle.spatial is None or bundle.spatial.shape != expected:
        got = None if bundle.spatial is None else bundle.spatial.shape
        raise ContractError(f"Spatial features {got} do not match the model's {expected}")
    cells = bundle.spatial.reshape(cfg.grid_size ** 2, cfg.spatial_dim)
    if cfg.spatial_coords:
        cells = np.concatenate([cells, cell_coordinates(cfg.grid_size)], axis=1)
    return cells


def make_batch(items: Sequence[QAItem], bundles: Dict[str, FeatureBundle], cfg: ModelConfig,
               with_targets: bool = True) -> Batch:
    """Token ids, object rows and spatial cells of the items, padded to the batch maximum"""
    if not items:
        raise InputError("Cannot batch zero items")
    flags = flags_for(cfg)
    questions, programs, rows, cells = [], [], [], []
    for item in items:
        if not item.question:
            raise InputError(f"Question {item.qid} is empty")
        questions.append(encode_tokens(item.question, QUESTION_INDEX))
        programs.append(encode_tokens(serialize_program(item.program), PROGRAM_INDEX))
        try:
            bundle = bundles[item.image_id]
        except KeyError:
            raise InputError(f"No features for image {item.image_id}")
        try:
            view = bundle.with_flags(flags)
        except ValueError as e:
            raise ContractError(f"Features of {item.image_id} do not fit the model flags: {e}")
        if view.detection.shape[1] != cfg.detection_width:
            raise ContractError(
                f"Detection rows of {item.image_id} are {view.detection.shape[1]} wide, "
                f"the model expects {cfg.detection_width}"
            )
        if view.object_count == 0:
            raise InputError(f"Image {item.image_id} has no objects")
        rows.append(view.detection)
        if cfg.use_spatial:
            cells.append(_cells(view, cfg))

    question_ids, question_lengths = _pad(questions)
    program_ids, program_lengths = _pad(programs)
    most = max(r.shape[0] for r in rows)
    objects = np.zeros((len(items), most, cfg.detection_width))
    object_mask = np.zeros((len(items), most))
    for b, r in enumerate(rows):
        objects[b, : r.shape[0]] = r
        object_mask[b, : r.shape[0]] = 1.0
    return Batch(
        qids=[item.qid for item in items],
        question_ids=question_ids,
        question_lengths=question_lengths,
        program_ids=program_ids,
        program_lengths=program_lengths,
        objects=objects,
        object_mask=object_mask,
        cells=np.stack(cells) if cfg.use_spatial else None,
        targets=np.array([answer_id(item.answer) for item in items], dtype=np.int64) if with_targets else None,
    )


# Forward pass

class QuestionEncoding(BaseModel):
    """F_q and F_p (B x H) and their fused projection joint (B x Q)"""
    F_q: Tensor
    F_p: Tensor
    joint: Tensor

    class Config:
        arbitrary_types_allowed = True


StepObserver = Callable[[int, Sequence], None]


def _encode_sequence(ids: np.ndarray, lengths: np.ndarray, prefix: str, cfg: ModelConfig, params: Params,
                     mode: str, rng: Optional[np.random.Generator], on_step: Optional[StepObserver]) -> Tensor:
    tokens = embed(ids, params[f"{prefix}.embedding"])
    gru = GruParams.from_named(params, f"{prefix}.gru")
    if cfg.encoder_kind == EncoderKind.GRU:
        return gru_encode(tokens, gru, lengths)
    return bayesian_gru_encode(tokens, gru, cfg.dropout_rate, rng, mode, lengths, on_step)


def encode(batch: Batch, cfg: ModelConfig, params: Params, mode: str = "eval",
           rng: Optional[np.random.Generator] = None, on_step: Optional[StepObserver] = None) -> QuestionEncoding:
    """Question (and program) encoders; joint = tanh([F_q, F_p] W + b)"""
    if batch.question_ids.shape[1] == 0:
        raise InputError("Cannot encode an empty question")
    F_q = _encode_sequence(batch.question_ids, batch.question_lengths, "question", cfg, params, mode, rng, on_step)
    if cfg.use_program:
        F_p = _encode_sequence(batch.program_ids, batch.program_lengths, "program", cfg, params, mode, rng, on_step)
    else:
        F_p = Tensor(np.zeros((batch.size, cfg.hidden_dim)))
    joint = ad.tanh(ad.concat([F_q, F_p], axis=-1) @ params["joint.W"] + params["joint.b"])
    return QuestionEncoding(F_q=F_q, F_p=F_p, joint=joint)


def logits(batch: Batch, enc: QuestionEncoding, cfg: ModelConfig, params: Params) -> Tensor:
    """B x K unnormalised answer scores"""
    if batch.objects.shape[2] != cfg.detection_width:
        raise ContractError(f"Object rows are {batch.objects.shape[2]} wide, the model expects {cfg.detection_width}")
    if cfg.use_spatial != (batch.cells is not None):
        raise ContractError("Spatial cells must be present exactly when use_spatial is on")
    det = AttentionParams.from_named(params, "det_attention")
    pooled, _ = attention_pool(Tensor(batch.objects), enc.joint, det, batch.object_mask)
    parts = [pooled]
    if cfg.use_spatial:
        spatial = AttentionParams.from_named(params, "spatial_attention")
        cells, _ = attention_pool(Tensor(batch.cells), enc.joint, spatial)
        parts.append(cells)
    parts.append(enc.joint)
    hidden = ad.relu(ad.concat(parts, axis=-1) @ params["classifier.W1"] + params["classifier.b1"])
    return hidden @ params["classifier.W2"] + params["classifier.b2"]


def forward(batch: Batch, enc: QuestionEncoding, cfg: ModelConfig, params: Params, mode: str = "eval") -> Tensor:
    """B x K answer probabilities"""
    if mode not in ("train", "eval"):
        raise ParameterError(f"Unknown mode {mode!r}")
    return ad.softmax(logits(batch, enc, cfg, params), axis=-1)


def loss(batch: Batch, cfg: ModelConfig, params: Params, mode: str = "train",
         rng: Optional[np.random.Generator] = None, on_step: Optional[StepObserver] = None) -> Tuple[Tensor, Tensor]:
    """Mean cross-entropy of the batch targets, plus the logits"""
    if batch.targets is None:
        raise InputError("Batch carries no targets")
    scores = logits(batch, encode(batch, cfg, params, mode, rng, on_step), cfg, params)
    return ad.cross_entropy(scores, batch.targets), scores


def predict_proba(params: Params, cfg: ModelConfig, items: Sequence[QAItem],
                  bundles: Dict[str, FeatureBundle], batch_size: int = 64) -> np.ndarray:
    """Eval-mode probabilities, one row per item in order"""
    rows = []
    for start in range(0, len(items), batch_size):
        batch = make_batch(items[start: start + batch_size], bundles, cfg, with_targets=False)
        rows.append(forward(batch, encode(batch, cfg, params, "eval"), cfg, params, "eval").data)
    return np.concatenate(rows, axis=0) if rows else np.zeros((0, cfg.num_answers))


# Checkpoints

def checkpoint_from_params(params: Params, cfg: ModelConfig, seed: Optional[int] = None) -> Checkpoint:
    return Checkpoint(
        config=cfg,
        seed=cfg.seed if seed is None else seed,
        vocab_fingerprint=ANSWER_FINGERPRINT,
        tensors={name: np.array(params[name].data, copy=True) for name in sorted(params)},
    )


def params_from_checkpoint(checkpoint: Checkpoint) -> Params:
    return {name: Tensor(np.array(values, copy=True), requires_grad=True)
            for name, values in checkpoint.tensors.items()}


def checkpoint_record(checkpoint: Checkpoint) -> dict:
    return {
        "version": checkpoint.version,
        "config": checkpoint.config.model_dump(mode="json"),
        "seed": checkpoint.seed,
        "vocab_fingerprint": checkpoint.vocab_fingerprint,
        "tensors": {
            name: {"shape": list(values.shape), "values": values.ravel().tolist()}
            for name, values in sorted(checkpoint.tensors.items())
        },
    }


def write_checkpoint(checkpoint: Checkpoint, path: str) -> None:
    # json writes floats in shortest round-trip form, so load-then-save is byte-identical
    write_json(path, checkpoint_record(checkpoint), indent=None)
    logger.info(f"Saved checkpoint with {len(checkpoint.tensors)} tensors to {path}")


def save_checkpoint(params: Params, cfg: ModelConfig, path: str, seed: Optional[int] = None) -> Checkpoint:
    checkpoint = checkpoint_from_params(params, cfg, seed)
    write_checkpoint(checkpoint, path)
    return checkpoint


def load_checkpoint(path: str) -> Checkpoint:
    """Read and verify a checkpoint against its own config and the answer vocabulary"""
    record = read_json(path)
    if not isinstance(record, dict) or "version" not in record:
        raise CheckpointError(f"{path} is not a checkpoint")
    if record["version"] != CHECKPOINT_VERSION:
        raise CheckpointVersionError(
            f"Checkpoint {path} has format version {record['version']}, expected {CHECKPOINT_VERSION}"
        )
    if record.get("vocab_fingerprint") != ANSWER_FINGERPRINT:
        raise CheckpointFingerprintError(
            f"Checkpoint {path} was trained on answer vocabulary {record.get('vocab_fingerprint')}, "
            f"expected {ANSWER_FINGERPRINT}"
        )
    try:
        cfg = ModelConfig(**record["config"])
    except (KeyError, TypeError, ValidationError) as e:
        raise CheckpointError(f"Checkpoint {path} has an invalid config: {e}")

    expected = param_shapes(cfg)
    stored = record.get("tensors", {})
    for name in sorted(set(stored) - set(expected)):
        raise CheckpointShapeError(f"Checkpoint {path} has unexpected tensor {name}", tensor=name)
    tensors = {}
    for name, shape in expected.items():
        if name not in stored:
            raise CheckpointShapeError(f"Checkpoint {path} is missing tensor {name}", tensor=name)
        entry = stored[name]
        if tuple(entry["shape"]) != shape:
            raise CheckpointShapeError(
                f"Tensor {name} has shape {tuple(entry['shape'])}, the config implies {shape}", tensor=name
            )
        values = np.asarray(entry["values"], dtype=np.float64)
        if values.size != int(np.prod(shape)):
            raise CheckpointShapeError(f"Tensor {name} holds {values.size} values for shape {shape}", tensor=name)
        tensors[name] = values.reshape(shape)
    return Checkpoint(
        version=record["version"],
        config=cfg,
        seed=record["seed"],
        vocab_fingerprint=record["vocab_fingerprint"],
        tensors=tensors,
    )

"""
Training loop, prediction and evaluation
"""
import logging
from collections import Counter
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from errors import FingerprintMismatchError, InputError, TrainingDivergedError
from models import autodiff as ad
from models.optim import Adam
from models.reason_net import (
    Params,
    StepObserver,
    checkpoint_from_params,
    init_params,
    loss,
    make_batch,
    params_from_checkpoint,
    predict_proba,
)
from schemas.checkpoint import Checkpoint
from schemas.config import ModelConfig, TrainConfig
from schemas.program import QAItem, TemplateId
from schemas.reports import EpochRecord, EvalReport, TemplateScore, TrainingHistory
from schemas.scores import ScoreSet
from schemas.world import FeatureBundle
from storage import write_jsonl
from utils.seeding import derive_rng
from utils.vocab import ANSWER_FINGERPRINT, ANSWER_VOCAB, answer_id

logger = logging.getLogger(__name__)

SCORE_RECORD_KEYS = ("qid", "scores", "vocab_fingerprint")


def accuracy_of(probabilities: np.ndarray, items: Sequence[QAItem]) -> float:
    """Argmax accuracy; np.argmax breaks ties toward the lowest class index"""
    if not items:
        return 0.0
    gold = np.array([answer_id(item.answer) for item in items])
    return float((np.argmax(probabilities, axis=1) == gold).mean())


def run_epoch(params: Params, optimizer: Adam, items: Sequence[QAItem], bundles: Dict[str, FeatureBundle],
              cfg: ModelConfig, batch_size: int, seed: int, epoch: int,
              on_step: Optional[StepObserver] = None) -> Tuple[float, float]:
    """One shuffled pass of Adam steps; returns (mean loss, train accuracy)"""
    order = derive_rng(seed, "shuffle", epoch).permutation(len(items))
    total_loss, correct = 0.0, 0
    for b, start in enumerate(range(0, len(items), batch_size)):
        chunk = [items[i] for i in order[start: start + batch_size]]
        batch = make_batch(chunk, bundles, cfg)
        optimizer.zero_grad()
        value, scores = loss(batch, cfg, params, "train", derive_rng(seed, "dropout", epoch, b), on_step)
        ad.backward(value)
        if not np.isfinite(value.item()):
            raise TrainingDivergedError(epoch, b, optimizer.max_grad())
        optimizer.step()
        total_loss += value.item() * len(chunk)
        correct += int((np.argmax(scores.data, axis=1) == batch.targets).sum())
    return total_loss / len(items), correct / len(items)


def train(train_items: Sequence[QAItem], val_items: Sequence[QAItem], bundles: Dict[str, FeatureBundle],
          cfg: TrainConfig, on_step: Optional[StepObserver] = None) -> Tuple[Checkpoint, TrainingHistory]:
    """Adam on cross-entropy with early stopping on validation accuracy.

    Returns the checkpoint of the best validation epoch. Stops after
    `patience` epochs without improvement or as soon as validation accuracy
    reaches 1.
    """
    if not train_items or not val_items:
        raise InputError(f"Training needs non-empty splits, got {len(train_items)} train / {len(val_items)} val")
    model_cfg = cfg.model.model_copy(update={"seed": cfg.seed})
    params = init_params(model_cfg)
    optimizer = Adam(params, cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.eps)
    history = TrainingHistory()
    best_params: Dict[str, np.ndarray] = {}
    stale = 0

    for epoch in range(1, cfg.max_epochs + 1):
        train_loss, train_accuracy = run_epoch(
            params, optimizer, train_items, bundles, model_cfg, cfg.batch_size, cfg.seed, epoch, on_step
        )
        val_accuracy = accuracy_of(predict_proba(params, model_cfg, val_items, bundles), val_items)
        history.epochs.append(EpochRecord(
            epoch=epoch, train_loss=train_loss, train_accuracy=train_accuracy, val_accuracy=val_accuracy,
        ))
        logger.info(f"Epoch {epoch}: loss={train_loss:.4f} train_acc={train_accuracy:.4f} val_acc={val_accuracy:.4f}")

        if val_accuracy > history.best_val_accuracy or not best_params:
            history.best_val_accuracy = val_accuracy
            history.best_epoch = epoch
            best_params = {name: p.data.copy() for name, p in params.items()}
            stale = 0
        else:
            stale += 1

        if val_accuracy >= 1.0:
            history.stopped_early = epoch < cfg.max_epochs
            history.stop_reason = "perfect_validation"
            break
        if stale >= cfg.patience:
            history.stopped_early = True
            history.stop_reason = "patience"
            break

    for name, values in best_params.items():
        params[name].data[...] = values
    logger.info(f"Best validation accuracy {history.best_val_accuracy:.4f} at epoch {history.best_epoch}")
    return checkpoint_from_params(params, model_cfg, cfg.seed), history


# Prediction

def score_set(probabilities: np.ndarray, items: Sequence[QAItem], tag: str = "") -> ScoreSet:
    return ScoreSet(
        scores={item.qid: row.tolist() for item, row in zip(items, probabilities)},
        vocab_fingerprint=ANSWER_FINGERPRINT,
        tag=tag,
    )


def predict_scores(checkpoint: Checkpoint, items: Sequence[QAItem], bundles: Dict[str, FeatureBundle],
                   tag: str = "") -> ScoreSet:
    """Eval-mode probabilities of every item"""
    if checkpoint.vocab_fingerprint != ANSWER_FINGERPRINT:
        raise FingerprintMismatchError(
            f"Checkpoint answer vocabulary {checkpoint.vocab_fingerprint} differs from {ANSWER_FINGERPRINT}"
        )
    if not items:
        raise InputError("Nothing to predict")
    probabilities = predict_proba(params_from_checkpoint(checkpoint), checkpoint.config, items, bundles)
    return score_set(probabilities, items, tag)


def score_records(scores: ScoreSet) -> List[dict]:
    return [
        {"qid": qid, "scores": vector, "vocab_fingerprint": scores.vocab_fingerprint}
        for qid, vector in scores.scores.items()
    ]


def predict(checkpoint: Checkpoint, items: Sequence[QAItem], bundles: Dict[str, FeatureBundle], path: str,
            tag: str = "") -> ScoreSet:
    """Write {qid, scores, vocab_fingerprint} lines; the bytes depend only on the inputs"""
    scores = predict_scores(checkpoint, items, bundles, tag)
    write_jsonl(path, score_records(scores))
    return scores


def read_score_records(records: Sequence[dict], tag: str = "") -> ScoreSet:
    """ScoreSet from prediction lines; all lines must share one fingerprint"""
    for line, record in enumerate(records, start=1):
        missing = [key for key in SCORE_RECORD_KEYS if not isinstance(record, dict) or key not in record]
        if missing:
            raise InputError(f"Score line {line} lacks {', '.join(missing)}")
    fingerprints = {record["vocab_fingerprint"] for record in records}
    if len(fingerprints) > 1:
        raise FingerprintMismatchError(f"Score file mixes answer vocabularies {sorted(fingerprints)}")
    try:
        return ScoreSet(
            scores={record["qid"]: record["scores"] for record in records},
            vocab_fingerprint=fingerprints.pop() if fingerprints else ANSWER_FINGERPRINT,
            tag=tag,
        )
    except ValidationError as e:
        raise InputError(f"Scores {tag!r} are invalid: {e.errors()[0]['msg']}")


# Evaluation

def majority_baseline(train_items: Sequence[QAItem], eval_items: Sequence[QAItem]) -> float:
    """Accuracy of always answering the most frequent training answer"""
    if not train_items or not eval_items:
        raise InputError("Majority baseline needs training and evaluation items")
    counts = Counter(item.answer for item in train_items)
    # ties go to the answer that comes first in the vocabulary
    majority = min(counts, key=lambda answer: (-counts[answer], answer_id(answer)))
    return sum(item.answer == majority for item in eval_items) / len(eval_items)


def evaluate_scores(scores: ScoreSet, items: Sequence[QAItem],
                    train_items: Optional[Sequence[QAItem]] = None) -> EvalReport:
    """Argmax accuracy overall, per template and as a gold x predicted confusion table"""
    if not items:
        raise InputError("Cannot evaluate an empty dataset")
    if scores.vocab_fingerprint != ANSWER_FINGERPRINT:
        raise FingerprintMismatchError(
            f"Scores use answer vocabulary {scores.vocab_fingerprint}, expected {ANSWER_FINGERPRINT}"
        )
    missing = [item.qid for item in items if item.qid not in scores.scores]
    if missing:
        raise InputError(f"No scores for {len(missing)} questions, e.g. {missing[0]}")

    per_template: Dict[str, List[int]] = {t.value: [0, 0] for t in TemplateId}
    confusion: Dict[str, Dict[str, int]] = {}
    correct = 0
    for item in items:
        predicted = ANSWER_VOCAB[int(np.argmax(scores.scores[item.qid]))]
        hit = predicted == item.answer
        correct += hit
        per_template[item.template.value][0] += hit
        per_template[item.template.value][1] += 1
        row = confusion.setdefault(item.answer, {})
        row[predicted] = row.get(predicted, 0) + 1

    return EvalReport(
        accuracy=correct / len(items),
        correct=correct,
        total=len(items),
        per_template={
            t: TemplateScore(correct=c, total=n, accuracy=c / n if n else 0.0)
            for t, (c, n) in per_template.items()
        },
        confusion={gold: dict(sorted(row.items())) for gold, row in sorted(confusion.items())},
        majority_baseline=majority_baseline(train_items, items) if train_items else None,
    )


def evaluate(checkpoint: Checkpoint, items: Sequence[QAItem], bundles: Dict[str, FeatureBundle],
             train_items: Optional[Sequence[QAItem]] = None) -> EvalReport:
    return evaluate_scores(predict_scores(checkpoint, items, bundles), items, train_items)


def subset_accuracy(report: EvalReport, templates: Sequence[TemplateId]) -> float:
    """Pooled accuracy over a group of templates"""
    scores = [report.per_template[t.value] for t in templates]
    total = sum(s.total for s in scores)
    return sum(s.correct for s in scores) / total if total else 0.0

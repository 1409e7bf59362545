"""
Average and weighted ensembling of score sets
"""
import logging
from fractions import Fraction
from itertools import permutations
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from errors import AlignmentError, FingerprintMismatchError, InputError, ParameterError
from schemas.reports import EnsembleReport
from schemas.scores import EnsembleWeights, ScoreSet
from utils.vocab import ANSWER_INDEX

logger = logging.getLogger(__name__)

# Up to this many models the whole simplex lattice is searched
EXHAUSTIVE_LIMIT = 4
ASCENT_START = Fraction(1, 5)

Gold = Dict[str, str]


def _check_aligned(sets: Sequence[ScoreSet]) -> None:
    if not sets:
        raise InputError("Nothing to combine")
    fingerprints = {s.vocab_fingerprint for s in sets}
    if len(fingerprints) > 1:
        raise FingerprintMismatchError(f"Score sets use different answer vocabularies: {sorted(fingerprints)}")
    qid_sets = [set(s.scores) for s in sets]
    union = set().union(*qid_sets)
    common = set.intersection(*qid_sets)
    if union != common:
        difference = sorted(union - common)
        raise AlignmentError(
            f"Score sets disagree on {len(difference)} question ids, e.g. {difference[:5]}", difference
        )


def _mix(matrices: Sequence[np.ndarray], weights: Sequence[float]) -> np.ndarray:
    """w_0 s_0 + w_1 s_1 + ..., accumulated in model order"""
    mixed = weights[0] * matrices[0]
    for w, m in zip(weights[1:], matrices[1:]):
        mixed = mixed + w * m
    return mixed


def _weights(weights: Union[EnsembleWeights, Sequence[float]]) -> List[float]:
    if isinstance(weights, EnsembleWeights):
        return list(weights.w)
    try:
        return list(EnsembleWeights(w=list(weights)).w)
    except ValidationError:
        raise ParameterError(f"Weights {list(weights)} are not a point of the simplex")


def combine(sets: Sequence[ScoreSet], weights: Union[EnsembleWeights, Sequence[float]], tag: str = "") -> ScoreSet:
    """Per question, the convex combination of the sets' probability vectors"""
    w = _weights(weights)
    if len(w) != len(sets):
        raise ParameterError(f"{len(w)} weights for {len(sets)} score sets")
    _check_aligned(sets)
    qids = sets[0].qids
    mixed = _mix([s.matrix(qids) for s in sets], w)
    return ScoreSet(
        scores={qid: row.tolist() for qid, row in zip(qids, mixed)},
        vocab_fingerprint=sets[0].vocab_fingerprint,
        tag=tag,
    )


def average_ensemble(sets: Sequence[ScoreSet], tag: str = "average") -> ScoreSet:
    return combine(sets, EnsembleWeights.uniform(len(sets)), tag)


def restrict(scores: ScoreSet, qids: Sequence[str]) -> ScoreSet:
    """Sub-set of the questions in `qids`, in that order"""
    missing = [qid for qid in qids if qid not in scores.scores]
    if missing:
        raise AlignmentError(f"Scores {scores.tag} lack {len(missing)} question ids", missing)
    return ScoreSet(
        scores={qid: scores.scores[qid] for qid in qids},
        vocab_fingerprint=scores.vocab_fingerprint,
        tag=scores.tag,
    )


def _gold_ids(gold: Gold) -> Tuple[List[str], np.ndarray]:
    qids = list(gold)
    return qids, np.array([ANSWER_INDEX[gold[qid]] for qid in qids])


def accuracy(scores: ScoreSet, gold: Gold) -> float:
    """Argmax accuracy against gold answers (ties to the lowest class)"""
    if not gold:
        raise InputError("No gold answers")
    qids, ids = _gold_ids(gold)
    return float((np.argmax(restrict(scores, qids).matrix(qids), axis=1) == ids).mean())


def _lattice(models: int, resolution: int):
    """All compositions of `resolution` into `models` non-negative parts"""
    if models == 1:
        yield (resolution,)
        return
    for first in range(resolution + 1):
        for rest in _lattice(models - 1, resolution - first):
            yield (first,) + rest


def _distance_to_uniform(point: Sequence[Fraction]) -> Fraction:
    centre = Fraction(1, len(point))
    return sum((p - centre) ** 2 for p in point)


def _resolution(step: float) -> int:
    resolution = int(round(1.0 / step)) if step > 0 else 0
    if resolution < 1 or abs(resolution * step - 1.0) > 1e-9:
        raise ParameterError(f"Step must divide 1, got {step}")
    return resolution


def search_weights(sets: Sequence[ScoreSet], gold: Gold, step: float = 0.05) -> Tuple[EnsembleWeights, float]:
    """Ensemble weights with the best validation accuracy.

    Up to four models the whole lattice of the given step plus the uniform
    point is scored; beyond that a pairwise coordinate ascent starts at the
    uniform point and halves its move size down to `step`. Ties go to the
    point closest to uniform, then to the lexicographically smallest one.
    """
    if not sets:
        raise InputError("No score sets to weigh")
    if not gold:
        raise InputError("Weight search needs validation answers")
    resolution = _resolution(step)
    _check_aligned(sets)
    qids, ids = _gold_ids(gold)
    matrices = [restrict(s, qids).matrix(qids) for s in sets]
    models = len(sets)

    def correct(point: Sequence[Fraction]) -> int:
        return int((np.argmax(_mix(matrices, [float(p) for p in point]), axis=1) == ids).sum())

    def key(point: Sequence[Fraction], hits: int):
        return (-hits, _distance_to_uniform(point), tuple(point))

    uniform = tuple([Fraction(1, models)] * models)
    best, best_hits = uniform, correct(uniform)

    if models <= EXHAUSTIVE_LIMIT:
        for counts in _lattice(models, resolution):
            point = tuple(Fraction(c, resolution) for c in counts)
            hits = correct(point)
            if key(point, hits) < key(best, best_hits):
                best, best_hits = point, hits
    else:
        delta = ASCENT_START
        floor = Fraction(1, resolution)
        while delta >= floor:
            improved = True
            while improved:
                improved = False
                for i, j in permutations(range(models), 2):
                    if best[j] < delta:
                        continue
                    point = list(best)
                    point[i] += delta
                    point[j] -= delta
                    hits = correct(point)
                    if hits > best_hits:
                        best, best_hits, improved = tuple(point), hits, True
            delta /= 2

    val_accuracy = best_hits / len(qids)
    logger.info(f"Best weights {[float(p) for p in best]} reach validation accuracy {val_accuracy:.4f}")
    return EnsembleWeights(w=[float(p) for p in best]), val_accuracy


def ensemble_report(sets: Sequence[ScoreSet], gold_val: Gold, gold_test: Optional[Gold] = None,
                    step: float = 0.05) -> Tuple[EnsembleReport, ScoreSet]:
    """Weighted, average and best single model on validation and test; plus the weighted scores"""
    weights, weighted_val = search_weights(sets, gold_val, step)
    weighted = combine(sets, weights, tag="weighted")
    average = average_ensemble(sets)

    singles = [accuracy(s, gold_val) for s in sets]
    best_index = int(np.argmax(singles))
    names = [s.tag or f"model{k}" for k, s in enumerate(sets)]

    report = EnsembleReport(
        models=names,
        weights=weights.w,
        step=step,
        weighted_val=weighted_val,
        weighted_test=accuracy(weighted, gold_test) if gold_test else None,
        average_val=accuracy(average, gold_val),
        average_test=accuracy(average, gold_test) if gold_test else None,
        best_single_model=names[best_index],
        best_single_val=singles[best_index],
        best_single_test=accuracy(sets[best_index], gold_test) if gold_test else None,
    )
    return report, weighted

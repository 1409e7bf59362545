"""
Score sets and ensemble weights
"""
from typing import Dict, List

import numpy as np
from pydantic import BaseModel, model_validator, validator

from utils.vocab import ANSWER_FINGERPRINT, ANSWER_VOCAB

PROBABILITY_TOLERANCE = 1e-6
WEIGHT_TOLERANCE = 1e-9


class ScoreSet(BaseModel):
    """Per-question probability vectors of one model, in insertion order"""
    scores: Dict[str, List[float]]
    vocab_fingerprint: str
    tag: str = ""

    @model_validator(mode="after")
    def check_probabilities(self):
        # vectors of a foreign vocabulary are rejected later by fingerprint
        width = len(ANSWER_VOCAB) if self.vocab_fingerprint == ANSWER_FINGERPRINT else None
        for qid, vector in self.scores.items():
            arr = np.asarray(vector, dtype=np.float64)
            if arr.ndim != 1 or arr.size == 0 or (width is not None and arr.size != width):
                raise ValueError(f"scores of {qid} have {arr.size} entries, expected {width or 'at least one'}")
            if arr.min() < 0.0 or abs(arr.sum() - 1.0) > PROBABILITY_TOLERANCE:
                raise ValueError(f"scores of {qid} are not a probability vector")
        return self

    @property
    def qids(self) -> List[str]:
        return list(self.scores)

    def matrix(self, qids: List[str]) -> np.ndarray:
        """Rows of the given qids as a Q x K array"""
        return np.array([self.scores[qid] for qid in qids], dtype=np.float64)


class EnsembleWeights(BaseModel):
    """Point of the probability simplex, one weight per model"""
    w: List[float]

    @validator("w")
    def validate_simplex(cls, v):
        if not v:
            raise ValueError("at least one weight is required")
        if min(v) < 0.0 or abs(sum(v) - 1.0) > WEIGHT_TOLERANCE:
            raise ValueError("weights must be non-negative and sum to 1")
        return v

    @classmethod
    def uniform(cls, count: int) -> "EnsembleWeights":
        return cls(w=[1.0 / count] * count)

"""
Evaluation, training history, ablation and ensemble reports
"""
from typing import Dict, List, Optional

from pydantic import BaseModel, model_validator


class TemplateScore(BaseModel):
    correct: int
    total: int
    accuracy: float


class EvalReport(BaseModel):
    accuracy: float
    correct: int
    total: int
    per_template: Dict[str, TemplateScore]
    # gold answer -> predicted answer -> count
    confusion: Dict[str, Dict[str, int]]
    majority_baseline: Optional[float] = None

    @model_validator(mode="after")
    def check_counts(self):
        if sum(t.total for t in self.per_template.values()) != self.total:
            raise ValueError("per-template counts must sum to the item count")
        return self


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    train_accuracy: float
    val_accuracy: float


class TrainingHistory(BaseModel):
    epochs: List[EpochRecord] = []
    best_epoch: int = 0
    best_val_accuracy: float = 0.0
    stopped_early: bool = False
    stop_reason: str = "max_epochs"


class AblationRow(BaseModel):
    name: str
    group: str
    validation: float
    spatial: float
    multi_step: float
    # per-seed overall validation accuracy
    runs: List[float]


class AblationReport(BaseModel):
    suite: str
    seeds: List[int]
    split_hash: str
    rows: List[AblationRow]


class EnsembleReport(BaseModel):
    models: List[str]
    weights: List[float]
    step: float
    weighted_val: float
    weighted_test: Optional[float] = None
    average_val: float
    average_test: Optional[float] = None
    best_single_model: str
    best_single_val: float
    best_single_test: Optional[float] = None

"""
Model and training configuration
"""
from enum import Enum
from typing import Optional

from pydantic import BaseModel, Field, validator

from schemas.world import Quality
from utils.vocab import ANSWER_VOCAB


class EncoderKind(str, Enum):
    GRU = "gru"
    BAYESIAN_GRU = "bayesian_gru"


class ModelConfig(BaseModel):
    """Dimensions and ablation flags of the reason network.

    embed_dim E, hidden_dim H, query_dim Q, attention_dim A, detection_dim D,
    grid_size G, spatial_dim C, num_answers K.
    """
    embed_dim: int = Field(32, gt=0)
    hidden_dim: int = Field(64, gt=0)
    query_dim: int = Field(64, gt=0)
    attention_dim: int = Field(64, gt=0)
    detection_dim: int = Field(64, gt=0)
    grid_size: int = Field(7, gt=0)
    spatial_dim: int = Field(32, gt=0)
    num_answers: int = len(ANSWER_VOCAB)
    mlp_hidden: int = Field(128, gt=0)
    use_spatial: bool = True
    use_bbox_position: bool = True
    use_bbox_size: bool = True
    use_program: bool = True
    spatial_coords: bool = False
    encoder_kind: EncoderKind = EncoderKind.BAYESIAN_GRU
    dropout_rate: float = 0.25
    seed: int = 0

    @validator("num_answers")
    def validate_num_answers(cls, v):
        if v != len(ANSWER_VOCAB):
            raise ValueError(f"num_answers must equal the answer vocabulary size {len(ANSWER_VOCAB)}")
        return v

    @validator("dropout_rate")
    def validate_dropout_rate(cls, v):
        if not 0.0 <= v < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")
        return v

    @property
    def detection_width(self) -> int:
        """Object row width: D plus the enabled bbox columns"""
        return self.detection_dim + 2 * int(self.use_bbox_position) + 2 * int(self.use_bbox_size)

    @property
    def cell_width(self) -> int:
        return self.spatial_dim + (2 if self.spatial_coords else 0)

    @property
    def classifier_width(self) -> int:
        width = self.detection_width + self.query_dim
        if self.use_spatial:
            width += self.cell_width
        return width


class TrainConfig(BaseModel):
    learning_rate: float = 1e-3
    batch_size: int = Field(32, ge=1)
    max_epochs: int = Field(30, ge=1)
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = Field(1e-8, gt=0)
    patience: int = Field(5, ge=1)
    seed: int = 0
    data_dir: Optional[str] = None
    quality: Optional[Quality] = None
    model: ModelConfig = ModelConfig()

    @validator("learning_rate")
    def validate_learning_rate(cls, v):
        if v <= 0:
            raise ValueError("learning_rate must be positive")
        return v

    @validator("beta1", "beta2")
    def validate_beta(cls, v):
        if not 0.0 < v < 1.0:
            raise ValueError("Adam moments must lie in (0, 1)")
        return v

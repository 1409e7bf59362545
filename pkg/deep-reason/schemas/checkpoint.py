"""
Checkpoint record
"""
from typing import Dict

import numpy as np
from pydantic import BaseModel

from schemas.config import ModelConfig

CHECKPOINT_VERSION = 1


class Checkpoint(BaseModel):
    """Trained parameters plus everything needed to rebuild the network"""
    version: int = CHECKPOINT_VERSION
    config: ModelConfig
    seed: int
    vocab_fingerprint: str
    tensors: Dict[str, np.ndarray]

    class Config:
        arbitrary_types_allowed = True

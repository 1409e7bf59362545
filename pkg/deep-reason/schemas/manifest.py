"""
Run manifest written next to every command's outputs
"""
from typing import Any, Dict, List, Optional

from pydantic import BaseModel

from utils.vocab import ANSWER_FINGERPRINT


class RunManifest(BaseModel):
    """What produced a set of files; carries no timestamps"""
    command: List[str]
    seed: int
    config_hash: str
    split_hash: Optional[str] = None
    vocab_fingerprint: str = ANSWER_FINGERPRINT
    inputs: Dict[str, str] = {}
    outputs: Dict[str, str] = {}
    version: str
    summary: Dict[str, Any] = {}

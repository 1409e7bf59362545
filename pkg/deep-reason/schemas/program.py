"""
Pydantic schemas for semantic programs and question-answer items
"""
from enum import Enum
from typing import Dict, List, Optional

from pydantic import BaseModel, validator

from utils.vocab import ANSWER_VOCAB


class Operation(str, Enum):
    SELECT = "select"
    FILTER = "filter"
    RELATE = "relate"
    EXIST = "exist"
    QUERY = "query"
    COMPARE_ATTR = "compare_attr"
    COUNT = "count"


class Direction(str, Enum):
    LEFT = "left"
    RIGHT = "right"
    ABOVE = "above"
    BELOW = "below"


class TemplateId(str, Enum):
    """Question templates"""
    QUERY_ATTRIBUTE = "T1"
    EXIST = "T2"
    SPATIAL_EXIST = "T3"
    RELATE_QUERY = "T4"
    COMPARE = "T5"
    COUNT = "T6"


SPATIAL_TEMPLATES = (TemplateId.SPATIAL_EXIST, TemplateId.RELATE_QUERY)
MULTI_STEP_TEMPLATES = (TemplateId.RELATE_QUERY, TemplateId.COMPARE)


class ProgramNode(BaseModel):
    """One node of a semantic program.

    select carries `constraints` (attribute type -> value); filter carries
    `attribute` and `value`; relate carries `direction`; query and
    compare_attr carry `attribute`. Structural checks live in
    utils.programs.validate_program.
    """
    op: Operation
    constraints: Dict[str, str] = {}
    attribute: Optional[str] = None
    value: Optional[str] = None
    direction: Optional[Direction] = None
    children: List["ProgramNode"] = []


ProgramNode.model_rebuild()


class QAItem(BaseModel):
    qid: str
    image_id: str
    template: TemplateId
    question: List[str]
    program: ProgramNode
    answer: str

    @validator("answer")
    def validate_answer(cls, v):
        if v not in ANSWER_VOCAB:
            raise ValueError(f"answer {v!r} is not in the answer vocabulary")
        return v

    @validator("question")
    def validate_question(cls, v):
        if not v:
            raise ValueError("question must have at least one token")
        return v

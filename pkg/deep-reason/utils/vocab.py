"""
Closed vocabularies: answers, question words and program tokens
"""
from typing import Dict, List, Sequence

from errors import FingerprintMismatchError, VocabularyIndexError
from schemas.world import Color, Material, Shape, SizeClass
from storage import sha256_text

PAD = "<pad>"

ATTRIBUTE_TYPES = ("color", "material", "shape", "size")
DIRECTIONS = ("left", "right", "above", "below")

ATTRIBUTE_VALUES: Dict[str, List[str]] = {
    "color": [c.value for c in Color],
    "material": [m.value for m in Material],
    "shape": [s.value for s in Shape],
    "size": [s.value for s in SizeClass],
}

MAX_COUNT = 8

ANSWER_VOCAB: List[str] = (
    ["yes", "no"]
    + ATTRIBUTE_VALUES["color"]
    + ATTRIBUTE_VALUES["shape"]
    + ATTRIBUTE_VALUES["size"]
    + ATTRIBUTE_VALUES["material"]
    + [str(n) for n in range(MAX_COUNT + 1)]
)

PLURAL_SHAPES = {shape: shape + "s" for shape in ATTRIBUTE_VALUES["shape"]}

QUESTION_VOCAB: List[str] = (
    [PAD, "what", "is", "the", "there", "a", "do", "and", "have", "same", "how", "many", "are", "of",
     "object", "objects"]
    + list(DIRECTIONS)
    + list(ATTRIBUTE_TYPES)
    + ATTRIBUTE_VALUES["color"]
    + ATTRIBUTE_VALUES["material"]
    + ATTRIBUTE_VALUES["shape"]
    + list(PLURAL_SHAPES.values())
    + ATTRIBUTE_VALUES["size"]
)

OPERATIONS = ("select", "filter", "relate", "exist", "query", "compare_attr", "count")

PROGRAM_VOCAB: List[str] = (
    [PAD, "(", ")"]
    + list(OPERATIONS)
    + [f"{name}=" for name in ATTRIBUTE_TYPES]
    + list(ATTRIBUTE_TYPES)
    + list(DIRECTIONS)
    + ATTRIBUTE_VALUES["color"]
    + ATTRIBUTE_VALUES["material"]
    + ATTRIBUTE_VALUES["shape"]
    + ATTRIBUTE_VALUES["size"]
)

ANSWER_INDEX = {answer: i for i, answer in enumerate(ANSWER_VOCAB)}
QUESTION_INDEX = {token: i for i, token in enumerate(QUESTION_VOCAB)}
PROGRAM_INDEX = {token: i for i, token in enumerate(PROGRAM_VOCAB)}


def vocab_fingerprint(vocab: Sequence[str] = ANSWER_VOCAB) -> str:
    """First 16 hex digits of SHA-256 over the ordered answer vocabulary"""
    return sha256_text("\n".join(vocab))[:16]


ANSWER_FINGERPRINT = vocab_fingerprint()


def check_fingerprint(fingerprint: str, what: str = "artifact") -> None:
    if fingerprint != ANSWER_FINGERPRINT:
        raise FingerprintMismatchError(
            f"{what} uses answer vocabulary {fingerprint}, expected {ANSWER_FINGERPRINT}"
        )


def answer_id(answer: str) -> int:
    try:
        return ANSWER_INDEX[answer]
    except KeyError:
        raise VocabularyIndexError(f"Answer {answer!r} is not in the answer vocabulary")


def encode_tokens(tokens: Sequence[str], index: Dict[str, int]) -> List[int]:
    """Token ids under a closed vocabulary"""
    ids = []
    for token in tokens:
        if token not in index:
            raise VocabularyIndexError(f"Token {token!r} is not in the vocabulary")
        ids.append(index[token])
    return ids

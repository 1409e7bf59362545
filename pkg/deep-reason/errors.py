"""
Exception hierarchy and exit codes
"""
from enum import IntEnum
from typing import List, Optional


class ExitCode(IntEnum):
    """Process exit codes"""
    OK = 0
    CONTRACT = 1
    USAGE = 2
    IO = 3


class DeepReasonError(Exception):
    """Base error: carries a one-line detail and the exit code it maps to"""
    exit_code = ExitCode.CONTRACT

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ContractError(DeepReasonError):
    """A precondition or postcondition of an operation was violated"""


class DimensionError(ContractError):
    """Tensor shapes do not agree"""


class VocabularyIndexError(ContractError, IndexError):
    """Index outside a vocabulary or class range"""


class ParameterError(ContractError, ValueError):
    """Invalid numeric parameter"""


class InputError(ContractError, ValueError):
    """Empty or malformed input data"""


class UsageError(DeepReasonError):
    """Invalid command-line usage"""
    exit_code = ExitCode.USAGE


class ConfigError(UsageError):
    """Invalid or infeasible configuration"""


class StorageError(DeepReasonError):
    """File could not be read or written"""
    exit_code = ExitCode.IO


class TranslationError(ContractError):
    """Question does not match any template of the grammar"""

    def __init__(self, detail: str, tokens: Optional[List[str]] = None):
        super().__init__(detail)
        self.tokens = list(tokens or [])


class ProgramParseError(ContractError):
    """Malformed program token stream"""

    def __init__(self, detail: str, position: int):
        super().__init__(f"{detail} (at token {position})")
        self.position = position


class AmbiguityError(ContractError):
    """Program step needs exactly one object but got a different number"""


class UninstantiableTemplate(DeepReasonError):
    """Template has no unique referent on this scene; caller resamples"""


class AlignmentError(ContractError):
    """Score sets cover different question ids"""

    def __init__(self, detail: str, difference: Optional[List[str]] = None):
        super().__init__(detail)
        self.difference = sorted(difference or [])


class FingerprintMismatchError(ContractError):
    """Answer vocabularies of two artifacts differ"""


class CheckpointError(ContractError):
    """Checkpoint file cannot be loaded"""


class CheckpointVersionError(CheckpointError):
    """Unsupported checkpoint format version"""


class CheckpointShapeError(CheckpointError):
    """Stored tensor does not match the shape the config implies"""

    def __init__(self, detail: str, tensor: str):
        super().__init__(detail)
        self.tensor = tensor


class CheckpointFingerprintError(CheckpointError, FingerprintMismatchError):
    """Checkpoint was trained against another answer vocabulary"""


class TrainingDivergedError(ContractError):
    """Loss became NaN or infinite"""

    def __init__(self, epoch: int, batch: int, max_grad: float):
        super().__init__(f"Non-finite loss at epoch {epoch}, batch {batch} (max |grad| = {max_grad:.3e})")
        self.epoch = epoch
        self.batch = batch
        self.max_grad = max_grad

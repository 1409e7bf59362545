"""
File persistence for datasets, checkpoints, score files and reports
"""
import hashlib
import json
import logging
import os
from typing import Any, Dict, Iterable, Iterator, List, Optional

import numpy as np

from errors import StorageError

logger = logging.getLogger(__name__)

# Significant digits for feature floats in scenes.jsonl
FEATURE_DIGITS = 9


def canonical_json(obj: Any) -> str:
    """Compact, key-sorted JSON used for hashing"""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    """Hex digest of a file's bytes"""
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as f:
            for chunk in iter(lambda: f.read(1 << 16), b""):
                digest.update(chunk)
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e.strerror}")
    return digest.hexdigest()


def round_array(values: np.ndarray, digits: int = FEATURE_DIGITS) -> List:
    """Nested lists of floats rounded to `digits` significant digits"""
    arr = np.asarray(values, dtype=np.float64)
    rounded = np.array([float(f"{v:.{digits}g}") for v in arr.ravel()], dtype=np.float64)
    return rounded.reshape(arr.shape).tolist()


def ensure_dir(path: str) -> None:
    try:
        os.makedirs(path, exist_ok=True)
    except OSError as e:
        raise StorageError(f"Cannot create directory {path}: {e.strerror}")


def write_text(path: str, text: str) -> None:
    parent = os.path.dirname(path)
    if parent:
        ensure_dir(parent)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write(text)
    except OSError as e:
        raise StorageError(f"Cannot write {path}: {e.strerror}")


def read_text(path: str) -> str:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return f.read()
    except OSError as e:
        raise StorageError(f"Cannot read {path}: {e.strerror}")


def write_json(path: str, obj: Any, indent: Optional[int] = 2) -> None:
    """Write one JSON document with a trailing newline"""
    if indent is None:
        text = json.dumps(obj, separators=(",", ":"))
    else:
        text = json.dumps(obj, indent=indent)
    write_text(path, text + "\n")


def read_json(path: str) -> Any:
    text = read_text(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise StorageError(f"Invalid JSON in {path}: {e.msg} (line {e.lineno})")


def write_jsonl(path: str, records: Iterable[Dict[str, Any]]) -> int:
    """Write one compact JSON object per line; returns the line count"""
    lines = [json.dumps(record, separators=(",", ":")) for record in records]
    write_text(path, "".join(line + "\n" for line in lines))
    logger.info(f"Wrote {len(lines)} records to {path}")
    return len(lines)


def iter_jsonl(path: str) -> Iterator[Dict[str, Any]]:
    text = read_text(path)
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            yield json.loads(line)
        except json.JSONDecodeError as e:
            raise StorageError(f"Invalid JSON in {path} line {lineno}: {e.msg}")


def read_jsonl(path: str) -> List[Dict[str, Any]]:
    return list(iter_jsonl(path))

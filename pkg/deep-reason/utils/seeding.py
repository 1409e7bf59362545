"""
Derived seeds; every random stream in the tool comes from here
"""
import hashlib

import numpy as np


def derive_seed(master: int, *labels) -> int:
    """64-bit seed from a master seed and a path of labels"""
    key = "/".join([str(master)] + [str(label) for label in labels])
    return int(hashlib.sha256(key.encode("utf-8")).hexdigest()[:16], 16)


def derive_rng(master: int, *labels) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *labels))

"""Deterministic seed derivation.

Every stage of the pipeline draws randomness from a sub-seed derived from
the global seed and a stable stage tag, so any stage can be reproduced in
isolation and runs are byte-identical across platforms.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(seed: int, tag: str) -> int:
    """Map (seed, tag) to a stable 64-bit sub-seed."""
    digest = hashlib.sha256(f"{seed}/{tag}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def rng_from(seed: int, tag: str | None = None) -> np.random.Generator:
    if tag is not None:
        seed = derive_seed(seed, tag)
    return np.random.Generator(np.random.PCG64(seed))

"""Deterministic RNG substreams from one root seed.

Every random draw goes through a labeled substream, so evaluation order can
never change which numbers a component sees.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["rng_for"]


def rng_for(seed: int, label: str) -> np.random.Generator:
    """Generator for the substream named by (seed, label)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *words]))

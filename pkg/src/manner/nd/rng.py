"""Deterministic randomness with purpose-keyed substreams.

All draws come from numpy's Philox counter-based generator.  A substream's
128-bit key is SHA-256(seed ":" label), so adding or removing one consumer
(say, dropout) never perturbs the draws of another (say, init or batch
order).  Identical seed means identical sequences on the same build.
"""

from __future__ import annotations

import hashlib

import numpy as np


class Rng:
    """Root seed plus named substreams."""

    algorithm = "philox4x64 keyed by sha256(seed:label)"

    def __init__(self, seed: int):
        self.seed = int(seed) & 0xFFFFFFFFFFFFFFFF

    def stream(self, label: str) -> np.random.Generator:
        """A fresh generator for one purpose, e.g. "init" or "batch/3"."""
        digest = hashlib.sha256(f"{self.seed}:{label}".encode()).digest()
        key = np.frombuffer(digest[:16], dtype=np.uint64)
        return np.random.Generator(np.random.Philox(key=key))

    def __repr__(self) -> str:
        return f"Rng(seed={self.seed})"

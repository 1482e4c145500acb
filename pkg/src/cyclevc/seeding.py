"""Deterministic derivation of per-consumer RNG streams from one root seed.

Every random choice in the package (parameter init, batch shuffling,
synthetic data) draws from a stream derived here, so a single integer seed
reproduces an entire run bit-for-bit.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(root_seed: int, label: str) -> int:
    """Map (root seed, consumer label) to a stable 64-bit child seed."""
    digest = hashlib.sha256(f"{root_seed}:{label}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def derive_rng(root_seed: int, label: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(root_seed, label))

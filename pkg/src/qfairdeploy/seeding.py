"""Deterministic named random streams derived from one master seed.

Every source of randomness in the package draws from `spawn(master, *key)`,
so runs are reproducible across platforms and independent of call order.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _key_words(parts) -> list[int]:
    digest = hashlib.sha256("/".join(str(p) for p in parts).encode()).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def spawn(master_seed: int, *key) -> np.random.Generator:
    """Generator for the named stream `key` under `master_seed`."""
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) & 0xFFFFFFFF] + _key_words(key)))

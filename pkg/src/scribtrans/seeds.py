"""Deterministic seed derivation.

A single master seed fans out into independent per-purpose sub-seeds through
a keyed hash, so adding a new consumer (another augmentation, another battery
member) never perturbs the random streams of existing ones. blake2b is used
because its output is stable across Python versions and platforms, unlike
``hash()``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *tokens) -> int:
    """Mix a master seed and a token path into a 64-bit sub-seed."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(master_seed)).encode())
    for tok in tokens:
        h.update(b"/")
        h.update(str(tok).encode())
    return int.from_bytes(h.digest(), "little")


def derived_rng(master_seed: int, *tokens) -> np.random.Generator:
    """A numpy Generator seeded from (master seed, token path)."""
    return np.random.default_rng(derive_seed(master_seed, *tokens))

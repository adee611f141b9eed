"""Seed derivation for reproducible, parallel-safe augmentation.

Per-slice seeds are derived by hashing ``(master_seed, *keys)`` with
BLAKE2b, so worker scheduling can never reorder random draws. All
generators are PCG64 (``numpy.random.default_rng``); given the same numpy
version the bit stream is identical across platforms and thread counts.
"""
from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(master_seed: int, *keys: object) -> int:
    """Deterministically derive a 64-bit seed from a master seed and keys."""
    token = repr((int(master_seed),) + tuple(keys)).encode("utf-8")
    digest = hashlib.blake2b(token, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def make_rng(seed: int) -> np.random.Generator:
    """A PCG64 generator for the given seed."""
    return np.random.default_rng(int(seed))

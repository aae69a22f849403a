"""Deterministic random-stream derivation.

Every stochastic stage derives its generators here so that runs are
reproducible from a single master seed and parallel workers can own
independent streams without coordinating.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream(*path: int) -> np.random.Generator:
    """Independent generator for an integer key path, e.g. (seed, epoch, batch)."""
    return np.random.default_rng(np.random.SeedSequence([p & 0xFFFFFFFFFFFFFFFF for p in path]))


def derive_seed(*path: int) -> int:
    """Single integer seed derived from a key path (recordable in manifests)."""
    ss = np.random.SeedSequence([p & 0xFFFFFFFFFFFFFFFF for p in path])
    return int(ss.generate_state(1, np.uint64)[0])


def text_key(text: str) -> int:
    """Stable 64-bit key for a string (sample ids, file names)."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")

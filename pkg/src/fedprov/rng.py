"""Deterministic RNG substream derivation.

Every stochastic stage derives its own generator from (master seed, tags).
Substreams are independent of call order, so per-province generation and
per-client training can run in any schedule without changing results.
"""

from __future__ import annotations

import zlib

import numpy as np


def _tag_to_int(tag: int | str) -> int:
    if isinstance(tag, int):
        if tag < 0:
            raise ValueError(f"rng tag must be non-negative, got {tag}")
        return tag
    return zlib.crc32(tag.encode("utf-8"))


def substream(seed: int, *tags: int | str) -> np.random.Generator:
    """Generator for the substream identified by (seed, *tags).

    String tags are hashed with crc32, which is stable across platforms
    and processes.
    """
    entropy = (int(seed),) + tuple(_tag_to_int(t) for t in tags)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def derive_seed(seed: int, *tags: int | str) -> int:
    """Collision-resistant integer seed for a named pipeline stage."""
    entropy = (int(seed),) + tuple(_tag_to_int(t) for t in tags)
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])

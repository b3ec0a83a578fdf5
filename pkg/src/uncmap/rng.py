"""Seeded, named random streams: one 64-bit seed fans out into independent per-stage generators."""

from __future__ import annotations

import zlib

import numpy as np


def stage_rng(seed: int, *names) -> np.random.Generator:
    """Generator for the named stage; the same (seed, names) always gives the same stream."""
    key = tuple(zlib.crc32(str(n).encode()) for n in names)
    ss = np.random.SeedSequence(entropy=int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=key)
    return np.random.default_rng(ss)

"""Seeded random-number plumbing.

Every source of randomness in a run is a named substream of one master seed,
so individual components (arrivals, oracle, agent, shuffle, ...) can be
perturbed independently while the rest of the run stays fixed.
"""

from __future__ import annotations

import zlib

import numpy as np


def substream(master_seed: int, name: str) -> np.random.Generator:
    """Independent generator derived from (master_seed, name); stable across runs."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([master_seed, tag])))

"""Labeled random streams derived from one master seed."""

import zlib

import numpy as np


def derive_rng(seed: int, label: str, *keys: int) -> np.random.Generator:
    """Independent generator for (seed, label, keys); same inputs, same stream."""
    spawn_key = (zlib.crc32(label.encode("utf-8")), *(int(k) for k in keys))
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key))

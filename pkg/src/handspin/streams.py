"""Named, independent random sub-streams derived from one seed."""

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Generator for ``name``; streams with different names never share draws."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])

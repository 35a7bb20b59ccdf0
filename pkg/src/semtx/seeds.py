"""Deterministic seed derivation for independent random substreams.

Every stochastic step in the pipeline draws from a generator keyed by a
tuple of labels (master seed, purpose, indices). SHA-256 keying is stable
across platforms and processes, unlike the builtin ``hash``.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts: int | str) -> int:
    """Collapse a mixed tuple of ints and strings into a 64-bit seed."""
    h = hashlib.sha256()
    for part in parts:
        if isinstance(part, str):
            data = part.encode("utf-8")
            h.update(b"s" + len(data).to_bytes(4, "big") + data)
        elif isinstance(part, (int, np.integer)):
            h.update(b"i" + int(part).to_bytes(16, "big", signed=True))
        else:
            raise TypeError(f"seed parts must be int or str, got {type(part)!r}")
    return int.from_bytes(h.digest()[:8], "big")


def substream(*parts: int | str) -> np.random.Generator:
    """Independent generator keyed by the given labels."""
    return np.random.Generator(np.random.Philox(key=derive_seed(*parts)))

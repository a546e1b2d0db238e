"""Stable seed derivation so unrelated pipeline stages draw independent streams.

Derivation is hash-based (not ``SeedSequence``) so the integers are
platform-stable and can be frozen into golden files.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(base: int | None, *tags: object) -> int:
    """Map a base seed plus context tags to a stable 64-bit seed."""
    text = ":".join(["0" if base is None else str(int(base)), *map(str, tags)])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def rng_for(base: int | None, *tags: object) -> np.random.Generator:
    return np.random.default_rng(derive_seed(base, *tags))

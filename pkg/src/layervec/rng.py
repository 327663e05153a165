"""Seed-stream management.

All randomness in the package flows from one root seed. Independent streams
are derived per purpose label so that modules stay reproducible in isolation:
``stream(seed, "flow", "stage2")`` always yields the same generator no matter
what other streams were drawn before it.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_key(label: str | int) -> int:
    if isinstance(label, int):
        return label & 0xFFFFFFFF
    return zlib.crc32(label.encode("utf8"))


def stream(root_seed: int, *labels: str | int) -> np.random.Generator:
    """Derive an independent generator from the root seed and a label path."""
    seq = np.random.SeedSequence(
        entropy=int(root_seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(_label_key(lb) for lb in labels),
    )
    return np.random.default_rng(seq)

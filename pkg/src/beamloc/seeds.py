"""Deterministic seed fan-out.

Every stochastic stage (scenario noise, dataset splits, weight init, ...)
gets its own child seed derived from the master seed plus a label path, so
adding or reordering stages never perturbs the streams of the others.
"""
from __future__ import annotations

import hashlib


def derive_seed(base: int, *labels) -> int:
    """Derive a uint32 child seed from `base` and a label path.

    Labels may be strings or integers; the same (base, labels) always maps to
    the same child. Collisions between distinct paths are as unlikely as
    sha256 collisions.
    """
    h = hashlib.sha256()
    h.update(str(int(base)).encode())
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return int.from_bytes(h.digest()[:4], "big")

"""Deterministic random streams.

Every stream is a Philox4x32 counter-based generator keyed by the master seed
plus a path of string labels, e.g. ``stream(seed, "cells", "dermis",
"fibroblasts")``. Labels are folded into the ``SeedSequence`` spawn key via
CRC-32, so a stream depends only on its own path and never on how many other
streams were drawn before it. That keeps per-layer or per-realization work
order-independent and safe to run in parallel.
"""
from __future__ import annotations

import zlib

import numpy as np


def _key(label) -> int:
    if isinstance(label, (int, np.integer)):
        return int(label)
    return zlib.crc32(str(label).encode("utf-8"))


def stream(seed: int, *path) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master: int, *path) -> int:
    """64-bit child seed for ``path`` under ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=tuple(_key(p) for p in path))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def realization_seeds(master: int, n: int) -> list:
    return [derive_seed(master, "realization", i) for i in range(n)]

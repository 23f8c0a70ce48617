"""Seed derivation.

Every random stream is derived from a single master seed by hashing the tuple
``(master, module, index)`` with BLAKE2b and feeding the 64-bit digest to a
counter-based Philox generator.  Streams for distinct indices are therefore
independent of the order in which they are created, which keeps batch-parallel
runs bitwise identical to serial ones.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_seed", "make_rng", "chunk_slices"]


def derive_seed(master: int, module: str, index: int = 0) -> int:
    """Return the 64-bit stream seed for ``(master, module, index)``."""
    key = f"{int(master)}:{module}:{int(index)}".encode()
    return int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")


def make_rng(master: int, module: str, index: int = 0) -> np.random.Generator:
    """Philox generator keyed by :func:`derive_seed`."""
    return np.random.Generator(np.random.Philox(derive_seed(master, module, index)))


def chunk_slices(n: int, chunk: int) -> list[slice]:
    """Fixed-size chunks of ``range(n)``; the layout never depends on thread count."""
    return [slice(i, min(i + chunk, n)) for i in range(0, n, chunk)]

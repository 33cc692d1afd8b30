"""Deterministic, stream-addressable random number generators.

All randomness in the package flows through counter-based Philox generators
keyed by (seed, stream ids). Two calls with the same key yield the same
stream regardless of call order, so parallel scans stay reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stream_rng(seed: int, *stream: int) -> np.random.Generator:
    """Return a Generator for the given (seed, *stream) address.

    The key is a 128-bit digest of the address, fed to Philox. Distinct
    addresses give statistically independent streams.
    """
    tag = repr((int(seed),) + tuple(int(s) for s in stream)).encode()
    digest = hashlib.blake2b(tag, digest_size=16).digest()
    key = np.frombuffer(digest, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def spawn_seed(seed: int, *stream: int) -> int:
    """Derive a 63-bit sub-seed from a master seed and stream ids."""
    tag = repr((int(seed),) + tuple(int(s) for s in stream)).encode()
    digest = hashlib.blake2b(tag, digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1

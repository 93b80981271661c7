"""Named random substreams derived from a single root seed.

Every stage asks for its own stream by name, so inserting a new stage never
shifts the draws of an existing one.
"""
from __future__ import annotations

import hashlib

import numpy as np


def _name_key(name: str) -> int:
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def seed_sequence(root_seed: int, name: str, *extra: int) -> np.random.SeedSequence:
    if root_seed < 0:
        raise ValueError(f"seed must be non-negative, got {root_seed}")
    return np.random.SeedSequence([int(root_seed), _name_key(name), *map(int, extra)])


def substream(root_seed: int, name: str, *extra: int) -> np.random.Generator:
    """Generator for the named stream; ``extra`` ints index sub-substreams (e.g. sentence index)."""
    return np.random.default_rng(seed_sequence(root_seed, name, *extra))


def derive_seed(root_seed: int, name: str, *extra: int) -> int:
    """A 63-bit integer seed for handing to another component."""
    state = seed_sequence(root_seed, name, *extra).generate_state(2, dtype=np.uint32)
    return (int(state[0]) << 31) ^ int(state[1])

"""Hierarchical, hash-based seed derivation.

A single root seed is threaded through the whole pipeline; every consumer
derives its own stream from (root, *tags) so partial reruns reproduce
exactly. Derivation uses blake2b, so it is stable across processes and
Python versions (unlike the builtin hash()).
"""

from __future__ import annotations

import hashlib

import numpy as np


def child_seed(root: int, *tags) -> int:
    """Derive a 64-bit seed from a root seed and a sequence of tags."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(root)).encode())
    for tag in tags:
        h.update(b"/")
        h.update(str(tag).encode())
    return int.from_bytes(h.digest(), "little")


def child_rng(root: int, *tags) -> np.random.Generator:
    """Independent numpy generator for (root, *tags)."""
    return np.random.default_rng(child_seed(root, *tags))


def torch_seed(root: int, *tags) -> int:
    """Seed suitable for torch.manual_seed (non-negative, < 2**63)."""
    return child_seed(root, *tags) & 0x7FFF_FFFF_FFFF_FFFF

"""Named, hash-derived random substreams.

One mission seed is split into independent substreams keyed by string
labels (per agent, per subsystem, per pair).  Derivation goes through
blake2b rather than Python's salted ``hash()`` so streams are stable
across processes and platforms, and adding a consumer never perturbs
the draws of existing ones.
"""

from __future__ import annotations

import hashlib

import numpy as np


def stable_seed(*parts: object) -> int:
    """Derive a 64-bit seed from an arbitrary label path."""
    text = "/".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def substream(*parts: object) -> np.random.Generator:
    """A generator whose stream depends only on the label path."""
    return np.random.default_rng(stable_seed(*parts))

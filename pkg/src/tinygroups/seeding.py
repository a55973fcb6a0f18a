"""Labelled RNG stream derivation.

Every consumer draws from ``stream(seed, tag, *ids)`` so that adding a new
consumer never perturbs an existing one.
"""

import hashlib

import numpy as np


def _tag_words(tag):
    digest = hashlib.sha256(tag.encode("utf-8")).digest()
    return [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]


def stream(seed, tag, *ids):
    """Return a fresh ``numpy.random.Generator`` for (seed, tag, ids)."""
    entropy = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    key = _tag_words(tag) + [int(i) & 0xFFFFFFFF for i in ids]
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=key))

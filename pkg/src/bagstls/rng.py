"""Deterministic seed derivation.

Every random stream is keyed by a root seed plus a tuple of labels, so
streams do not depend on the order in which work items are executed.
"""

import hashlib

import numpy as np


def _label_to_int(label):
    if isinstance(label, (int, np.integer)):
        return int(label) & 0xFFFFFFFFFFFFFFFF
    if isinstance(label, float):
        label = repr(label)
    digest = hashlib.sha256(str(label).encode()).digest()
    return int.from_bytes(digest[:8], "little")


def seed_sequence(seed, *keys):
    """``SeedSequence`` for the substream ``(seed, *keys)``."""
    return np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=tuple(_label_to_int(k) for k in keys),
    )


def substream(seed, *keys):
    """A fresh ``Generator`` for the substream ``(seed, *keys)``."""
    return np.random.Generator(np.random.PCG64(seed_sequence(seed, *keys)))


def derive_seed(seed, *keys):
    """A 64-bit integer seed for the substream ``(seed, *keys)``."""
    state = seed_sequence(seed, *keys).generate_state(1, dtype=np.uint64)
    return int(state[0])

"""Counter-based seed derivation.

All randomness in a run flows from one integer root seed. Sub-seeds are
derived from ``(root, key, key, ...)`` so that adding a new consumer never
shifts the seeds of existing ones.
"""
import zlib

import numpy as np


def _key_to_int(key):
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    return zlib.crc32(str(key).encode("utf-8"))


def derive_seed(root, *keys):
    """Return a 32-bit seed determined only by ``root`` and the key path."""
    seq = np.random.SeedSequence(int(root) & 0xFFFFFFFFFFFFFFFF,
                                 spawn_key=tuple(_key_to_int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def rng(root, *keys):
    return np.random.default_rng(derive_seed(root, *keys))

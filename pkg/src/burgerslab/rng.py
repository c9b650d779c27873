"""Counter-based random streams.

Every random draw in the package comes from a Philox generator whose key is
derived from ``(seed, *labels)``.  Labels are strings or integers (stream
name, component, time index, block index, ...), so any increment can be
regenerated independently of how many others were drawn before it.  This is
what makes suffix reseeding and worker-count independence possible.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_word(label):
    if isinstance(label, (int, np.integer)):
        return int(label) & _MASK64
    digest = hashlib.blake2b(str(label).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed, *labels):
    """Return a fresh ``numpy.random.Generator`` keyed by ``seed`` and ``labels``."""
    seed = int(seed)
    if seed < 0 or seed > _MASK64:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    words = tuple(_label_word(lab) for lab in labels)
    ss = np.random.SeedSequence(entropy=seed, spawn_key=words)
    return np.random.Generator(np.random.Philox(ss))


def normals(seed, *labels, size):
    return stream(seed, *labels).standard_normal(size)

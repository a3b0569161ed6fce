"""Deterministic random streams built on the Philox counter-based generator.

Every source of randomness in the package derives from a 64-bit user seed.
Independent streams are keyed by ``(seed XOR label-hash, trial)`` so that
Monte Carlo trials are reproducible per index regardless of whether they
run serially or across workers.
"""

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _label_word(label):
    if label is None:
        return 0
    digest = hashlib.blake2b(label.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed, trial=0, label=None):
    """Philox bit generator for (seed, trial), optionally in a named substream."""
    key = np.array(
        [(int(seed) ^ _label_word(label)) & _MASK64, int(trial) & _MASK64],
        dtype=np.uint64,
    )
    return np.random.Philox(key=key)


def generator(seed, trial=0, label=None):
    """numpy Generator wrapping :func:`stream`."""
    return np.random.Generator(stream(seed, trial, label))

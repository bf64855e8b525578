"""Deterministic RNG stream derivation.

Child streams are derived from a master seed and a path of labels, so a
replication, a fold inside it, and a bootstrap replicate inside that all
get independent generators regardless of execution order or thread
scheduling.

Derivation (portable, documented for cross-language reimplementation):
the master seed is finalized with SplitMix64; each label is serialized
(UTF-8 for strings, 8-byte little-endian two's complement for ints),
folded into the state with FNV-1a(64), and finalized with SplitMix64
again.  The resulting 64-bit value seeds numpy's PCG64.
"""

from __future__ import annotations

import numpy as np

_MASK = 0xFFFFFFFFFFFFFFFF
_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def _fnv1a(state: int, data: bytes) -> int:
    h = state
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def _label_bytes(label) -> bytes:
    if isinstance(label, str):
        return b"s" + label.encode("utf-8")
    if isinstance(label, (int, np.integer)):
        return b"i" + int(label).to_bytes(8, "little", signed=True)
    raise TypeError(f"labels must be str or int, got {type(label).__name__}")


def child_seed(master_seed: int, *labels) -> int:
    """Return the 64-bit child seed for (master_seed, labels...)."""
    state = _splitmix64(int(master_seed) & _MASK)
    for label in labels:
        state = _fnv1a(state, _label_bytes(label))
        state = _splitmix64(state)
    return state


def rng_stream(master_seed: int, *labels) -> np.random.Generator:
    """Derive an independent generator for a labeled sub-task.

    Same (master_seed, labels) always yields the same stream; sibling
    label paths yield streams that differ already in their first draw.

    Args:
        master_seed: experiment-level seed.
        *labels: path of str/int labels, e.g. ("rep", 3, "fold", 0).

    Returns:
        numpy Generator backed by PCG64 seeded with the derived value.
    """
    return np.random.Generator(np.random.PCG64(child_seed(master_seed, *labels)))

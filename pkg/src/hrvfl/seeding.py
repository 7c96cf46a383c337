"""Deterministic seed derivation.

All randomness flows through numpy's ``PCG64`` bit generator. Child seeds
are derived by hashing a master seed together with a tuple of keys through
``numpy.random.SeedSequence``, so each consumer (feature map, fold splitter,
noise injector, batch sampler) gets its own independent stream. The
generator identity is part of the reproducibility contract.
"""

from __future__ import annotations

import hashlib

import numpy as np

RNG_ALGORITHM = "numpy.PCG64/SeedSequence"
RNG_VERSION = 1

_MASK64 = (1 << 64) - 1


def _digest_words(text: str) -> list[int]:
    h = int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")
    return [h & 0xFFFFFFFF, h >> 32]


def _key_words(key) -> list[int]:
    """Encode one key as a type tag followed by 32-bit words."""
    if isinstance(key, (bool, np.bool_)):
        return [0, int(key)]
    if isinstance(key, (int, np.integer)):
        key = int(key) & _MASK64
        return [1, key & 0xFFFFFFFF, key >> 32]
    if isinstance(key, (float, np.floating)):
        return [2, *_digest_words(repr(float(key)))]
    if isinstance(key, str):
        return [3, *_digest_words(key)]
    raise TypeError(f"unsupported seed key type {type(key).__name__}")


def derive_seed(master: int, *keys) -> int:
    """Return a 64-bit seed that is a pure function of ``(master, *keys)``.

    Keys may be ints, floats or strings. Each key contributes a type tag
    so that ``derive_seed(s, 1)`` and ``derive_seed(s, "1")`` differ.
    """
    words = _key_words(int(master))
    for key in keys:
        words.extend(_key_words(key))
    ss = np.random.SeedSequence(words)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """Generator backed by ``PCG64`` for a 64-bit seed."""
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))

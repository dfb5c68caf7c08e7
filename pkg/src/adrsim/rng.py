"""Counter-based random streams.

Every draw in a run is a pure function of ``(seed, label, counters...)``, so
removing an object or switching a phase off never shifts the draws seen by
anything else. Two policy variants run on the same seed therefore share
their random numbers wherever their populations agree.
"""

from __future__ import annotations

import hashlib

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def splitmix64(x):
    """Vectorised splitmix64 finaliser on uint64 input."""
    x = np.asarray(x, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = x + _GOLDEN
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def label_key(label: str) -> int:
    """Stable 64-bit key for a phase label (``hash()`` is salted per process)."""
    return int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), "little")


def hash_keys(seed: int, label: str, *keys) -> np.ndarray:
    """Mix a seed, a label and any number of integer key arrays into uint64 hashes."""
    h = splitmix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) ^ np.uint64(label_key(label)))
    for k in keys:
        k = np.asarray(k).astype(np.int64).view(np.uint64) if np.ndim(k) else np.uint64(int(k) & 0xFFFFFFFFFFFFFFFF)
        h = splitmix64(h ^ k)
    return h


def to_unit(h: np.ndarray) -> np.ndarray:
    """Map uint64 hashes to floats in [0, 1) using the top 53 bits."""
    return (np.asarray(h, dtype=np.uint64) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)


class CounterStream:
    """Seed-derived stream handing out keyed uniforms and keyed generators."""

    def __init__(self, seed: int):
        self.seed = int(seed)

    def uniform(self, label: str, *keys) -> np.ndarray:
        return to_unit(hash_keys(self.seed, label, *keys))

    def generator(self, label: str, *keys) -> np.random.Generator:
        h = int(hash_keys(self.seed, label, *keys))
        h2 = int(splitmix64(np.uint64(h)))
        return np.random.Generator(np.random.Philox(key=[h, h2]))

    def at(self, label: str, step: int) -> "StepStream":
        return StepStream(self, label, step)


class StepStream:
    """A stream bound to one phase label and timestep.

    ``uniform_for(ids)`` returns one draw per object id, independent of how
    many other objects exist.
    """

    def __init__(self, stream: CounterStream, label: str, step: int):
        self.stream = stream
        self.label = label
        self.step = int(step)

    def uniform_for(self, *keys) -> np.ndarray:
        return self.stream.uniform(self.label, self.step, *keys)

    def generator(self, *keys) -> np.random.Generator:
        return self.stream.generator(self.label, self.step, *keys)


def uniforms(rng, *keys) -> np.ndarray:
    """Draw one uniform per key from either a numpy Generator or a StepStream.

    A plain Generator consumes its state in key order; a StepStream hashes the
    keys so the result does not depend on order or on the other keys present.
    """
    n = len(np.atleast_1d(keys[0])) if keys else 1
    if isinstance(rng, StepStream):
        return np.atleast_1d(rng.uniform_for(*keys)).astype(float)
    return rng.random(n)


def generator_of(rng, *keys) -> np.random.Generator:
    if isinstance(rng, StepStream):
        return rng.generator(*keys)
    return rng

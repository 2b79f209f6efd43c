"""Deterministic counter-based random number generation.

All randomness in the package flows from a single integer seed through named
substreams built on the splitmix64 mixing function.  Streams are stateless
per draw index, so results are reproducible regardless of how work is
batched or parallelized.
"""

from __future__ import annotations

import hashlib

import numpy as np

_U64 = np.uint64
_GOLDEN = _U64(0x9E3779B97F4A7C15)
_MIX1 = _U64(0xBF58476D1CE4E5B9)
_MIX2 = _U64(0x94D049BB133111EB)


def mix64(z):
    """splitmix64 finalizer; accepts uint64 scalars or arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> _U64(30))) * _MIX1
        z = (z ^ (z >> _U64(27))) * _MIX2
        return z ^ (z >> _U64(31))


def _label_hash(label) -> np.uint64:
    if isinstance(label, (int, np.integer)):
        with np.errstate(over="ignore"):
            return mix64(_U64(int(label) & 0xFFFFFFFFFFFFFFFF) + _GOLDEN)
    digest = hashlib.blake2b(str(label).encode(), digest_size=8).digest()
    return _U64(int.from_bytes(digest, "little"))


def derive_key(seed, *path) -> np.uint64:
    """Derive an independent stream key from a seed and a substream path.

    Path elements may be strings ("train", "noise") or integers (chain
    indices).  Identical (seed, path) always yields the identical key.
    """
    key = mix64(_U64(int(seed) & 0xFFFFFFFFFFFFFFFF))
    for element in path:
        key = mix64(key ^ _label_hash(element))
    return _U64(key)


def uniform_from_bits(z):
    """Map uint64 words to doubles strictly inside (0, 1)."""
    z = np.asarray(z, dtype=np.uint64)
    return (z >> _U64(12)).astype(np.float64) * (2.0**-52) + 2.0**-53


def counter_uniform(key, counters):
    """Counter-based uniforms: same (key, counter) gives the same value."""
    c = np.asarray(counters, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return uniform_from_bits(mix64((c + _U64(1)) * _GOLDEN ^ _U64(key)))


class StreamSet:
    """A batch of independent sequential splitmix64 streams.

    Stream i is keyed by derive_key-style mixing of (key, i); each call to
    next_uniform advances every stream one step in lockstep.  Values for
    stream i depend only on (key, i, draw index).
    """

    def __init__(self, key, n_streams):
        idx = np.arange(n_streams, dtype=np.uint64)
        self._states = mix64(_U64(key) ^ (idx + _U64(1)) * _GOLDEN)

    def next_uniform(self):
        self._states = self._states + _GOLDEN
        return uniform_from_bits(mix64(self._states))

    def getstate(self):
        return self._states.copy()

    def setstate(self, states):
        self._states = np.asarray(states, dtype=np.uint64).copy()


def gaussian_field(key, codes, sigma):
    """Frozen Gaussian noise per configuration code, std sigma.

    Implemented as a counter-based hash of the code followed by the standard
    normal quantile, so the realization for a given (key, code) is fixed
    across all evaluations and no table is stored.
    """
    from scipy.special import ndtri

    u = counter_uniform(key, codes)
    return sigma * ndtri(u)

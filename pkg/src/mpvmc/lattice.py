"""Spin configurations, state-space enumeration, and proposal neighborhoods.

Configurations are stored as packed integer codes with the system size kept
alongside (bit i of the code is bits_i), which bounds the system at 62 sites
and makes hashing and copying cheap.  2D sites are flattened row-major:
site (r, c) -> r*L + c.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EnumerationTooLargeError

ENUMERATION_LIMIT = 14
MAX_SITES = 62


@dataclass(frozen=True)
class SpinConfiguration:
    """A computational-basis state: length-n binary vector, spin s_i = 1 - 2*bits_i."""

    code: int
    n: int

    def __post_init__(self):
        if not 1 <= self.n <= MAX_SITES:
            raise ValueError(f"system size {self.n} outside [1, {MAX_SITES}]")
        if not 0 <= self.code < (1 << self.n):
            raise ValueError(f"code {self.code} does not fit in {self.n} bits")

    @classmethod
    def from_bits(cls, bits) -> "SpinConfiguration":
        bits = [int(b) for b in bits]
        if any(b not in (0, 1) for b in bits):
            raise ValueError("bits must be 0/1")
        code = sum(b << i for i, b in enumerate(bits))
        return cls(code, len(bits))

    def bit(self, i: int) -> int:
        return (self.code >> i) & 1

    def bits(self) -> np.ndarray:
        return np.array([(self.code >> i) & 1 for i in range(self.n)], dtype=np.uint8)

    def spins(self) -> np.ndarray:
        return 1 - 2 * self.bits().astype(np.int64)

    def magnetization(self) -> int:
        return self.n - 2 * self.hamming_weight()

    def hamming_weight(self) -> int:
        return int(self.code).bit_count()

    def __str__(self):
        return "".join(str((self.code >> i) & 1) for i in range(self.n))


def flip_neighbor(x: SpinConfiguration, i: int) -> SpinConfiguration:
    """Configuration obtained from x by flipping bit i (involutive)."""
    if not 0 <= i < x.n:
        raise IndexError(f"site {i} out of range for n={x.n}")
    return SpinConfiguration(x.code ^ (1 << i), x.n)


def exchange_neighbor(x: SpinConfiguration, i: int, j: int) -> SpinConfiguration:
    """Configuration with bits i and j swapped; preserves magnetization."""
    if i == j:
        raise ValueError("exchange requires two distinct sites")
    if not (0 <= i < x.n and 0 <= j < x.n):
        raise IndexError(f"sites ({i}, {j}) out of range for n={x.n}")
    bi = (x.code >> i) & 1
    bj = (x.code >> j) & 1
    code = x.code
    if bi != bj:
        code ^= (1 << i) | (1 << j)
    return SpinConfiguration(code, x.n)


def _check_enumerable(n: int):
    if not 1 <= n <= ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"enumeration supports 1 <= n <= {ENUMERATION_LIMIT}, got {n}"
        )


def enumerate_states(n: int) -> list[SpinConfiguration]:
    """All 2^n configurations in ascending integer-encoding order."""
    _check_enumerable(n)
    return [SpinConfiguration(code, n) for code in range(1 << n)]


def enumerate_bits(n: int) -> np.ndarray:
    """Bit matrix of shape (2^n, n) matching enumerate_states order."""
    _check_enumerable(n)
    codes = np.arange(1 << n, dtype=np.uint64)
    return ((codes[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & 1).astype(
        np.uint8
    )


def codes_to_bits(codes, n: int) -> np.ndarray:
    """Bit matrix for an arbitrary array of configuration codes."""
    codes = np.asarray(codes, dtype=np.uint64)
    return ((codes[:, None] >> np.arange(n, dtype=np.uint64)[None, :]) & 1).astype(
        np.uint8
    )


def bits_to_codes(bits) -> np.ndarray:
    bits = np.asarray(bits, dtype=np.uint64)
    weights = np.uint64(1) << np.arange(bits.shape[-1], dtype=np.uint64)
    return (bits * weights).sum(axis=-1, dtype=np.uint64)


@dataclass(frozen=True)
class LatticeSpec:
    """Chain or square lattice with its derived nearest-neighbor bond list."""

    shape: tuple
    periodic: bool
    bonds: tuple = field(init=False)

    def __post_init__(self):
        if len(self.shape) == 1:
            (n,) = self.shape
            if n < 1:
                raise ValueError("chain length must be >= 1")
            if self.periodic and n < 3:
                raise ValueError("periodic chain requires n >= 3")
            bonds = [(i, i + 1) for i in range(n - 1)]
            if self.periodic and n >= 3:
                bonds.append((0, n - 1))
        elif len(self.shape) == 2:
            rows, cols = self.shape
            if rows != cols:
                raise ValueError("only square 2D lattices are supported")
            length = rows
            if self.periodic and length < 3:
                raise ValueError("periodic square lattice requires L >= 3")
            if length < 2:
                raise ValueError("square lattice requires L >= 2")
            bonds = []
            for r in range(length):
                for c in range(length):
                    site = r * length + c
                    if c + 1 < length:
                        bonds.append((site, site + 1))
                    elif self.periodic:
                        bonds.append((r * length, site))
                    if r + 1 < length:
                        bonds.append((site, site + length))
                    elif self.periodic:
                        bonds.append((c, site))
            bonds = [(min(i, j), max(i, j)) for i, j in bonds]
        else:
            raise ValueError("shape must be (n,) or (L, L)")
        bonds = sorted(set(bonds))
        if len(bonds) != len(set(bonds)):
            raise ValueError("duplicate bonds")
        object.__setattr__(self, "bonds", tuple(bonds))

    @classmethod
    def chain(cls, n: int, periodic: bool = False) -> "LatticeSpec":
        return cls((n,), periodic)

    @classmethod
    def square(cls, length: int, periodic: bool = True) -> "LatticeSpec":
        return cls((length, length), periodic)

    @property
    def n_sites(self) -> int:
        return int(np.prod(self.shape))

    @property
    def boundary(self) -> str:
        return "periodic" if self.periodic else "open"

    def bond_array(self) -> np.ndarray:
        return np.array(self.bonds, dtype=np.int64).reshape(-1, 2)

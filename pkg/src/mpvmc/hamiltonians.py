"""TFIM and Heisenberg Hamiltonians: sparse connected elements, dense
assembly, and the exact ground-state oracle for enumerable systems.

Sign conventions follow H = J sum_<ij> sz_i sz_j + h sum_i sx_i for the TFIM
(both terms positive) and H = J sum_<ij> sigma_i . sigma_j written in Pauli
matrices for the Heisenberg model, so a bond contributes +-J on the diagonal
and 2J off-diagonally when the two spins differ.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import EnumerationTooLargeError
from .lattice import (
    ENUMERATION_LIMIT,
    LatticeSpec,
    SpinConfiguration,
    enumerate_bits,
    exchange_neighbor,
    flip_neighbor,
)


@dataclass(frozen=True)
class TfimSpec:
    lattice: LatticeSpec
    j: float
    h: float

    def __post_init__(self):
        if not (np.isfinite(self.j) and np.isfinite(self.h)):
            raise ValueError("couplings must be finite")


@dataclass(frozen=True)
class HeisenbergSpec:
    lattice: LatticeSpec
    j: float

    def __post_init__(self):
        if not np.isfinite(self.j):
            raise ValueError("coupling must be finite")


@dataclass(frozen=True)
class SparseRow:
    """One Hamiltonian row: H(x, x) plus the connected off-diagonal entries."""

    diagonal: float
    offdiagonal: tuple  # of (SpinConfiguration, float)


def _bond_energy(lattice: LatticeSpec, x: SpinConfiguration, j: float) -> float:
    spins = x.spins()
    total = 0
    for i, k in lattice.bonds:
        total += spins[i] * spins[k]
    return j * total


def connected_elements(spec, x: SpinConfiguration) -> SparseRow:
    """All configurations x' with H(x, x') != 0, plus the diagonal element."""
    lattice = spec.lattice
    if x.n != lattice.n_sites:
        raise ValueError(
            f"configuration has {x.n} sites, lattice has {lattice.n_sites}"
        )
    if isinstance(spec, TfimSpec):
        diag = _bond_energy(lattice, x, spec.j)
        off = tuple(
            (flip_neighbor(x, i), spec.h) for i in range(x.n) if spec.h != 0.0
        )
        return SparseRow(diag, off)
    if isinstance(spec, HeisenbergSpec):
        diag = _bond_energy(lattice, x, spec.j)
        off = []
        for i, k in lattice.bonds:
            if x.bit(i) != x.bit(k):
                off.append((exchange_neighbor(x, i, k), 2.0 * spec.j))
        return SparseRow(diag, tuple(off))
    raise TypeError(f"unknown Hamiltonian spec {type(spec).__name__}")


def _check_dense(n: int):
    if n > ENUMERATION_LIMIT:
        raise EnumerationTooLargeError(
            f"dense assembly supports n <= {ENUMERATION_LIMIT}, got {n}"
        )


def dense_matrix(spec) -> np.ndarray:
    """Full 2^n x 2^n real symmetric matrix in enumerate_states order."""
    lattice = spec.lattice
    n = lattice.n_sites
    _check_dense(n)
    dim = 1 << n
    bits = enumerate_bits(n).astype(np.int64)
    spins = 1 - 2 * bits
    bonds = lattice.bond_array()
    if bonds.size:
        diag = (spins[:, bonds[:, 0]] * spins[:, bonds[:, 1]]).sum(axis=1).astype(
            np.float64
        )
    else:
        diag = np.zeros(dim)
    matrix = np.zeros((dim, dim))
    codes = np.arange(dim)
    if isinstance(spec, TfimSpec):
        np.fill_diagonal(matrix, spec.j * diag)
        for i in range(n):
            matrix[codes, codes ^ (1 << i)] += spec.h
    elif isinstance(spec, HeisenbergSpec):
        np.fill_diagonal(matrix, spec.j * diag)
        for i, k in lattice.bonds:
            differ = bits[:, i] != bits[:, k]
            swapped = codes[differ] ^ ((1 << i) | (1 << k))
            matrix[codes[differ], swapped] += 2.0 * spec.j
    else:
        raise TypeError(f"unknown Hamiltonian spec {type(spec).__name__}")
    return matrix


def exact_ground_state(spec, full_spectrum: bool = False):
    """Dense symmetric eigensolve; the desk-scale stand-in for DMRG references.

    Returns (E0, psi0) with psi0 normalized and its largest-magnitude entry
    positive, or (E0, psi0, all eigenvalues) when full_spectrum is set.
    """
    matrix = dense_matrix(spec)
    if full_spectrum:
        values, vectors = scipy.linalg.eigh(matrix)
        e0 = float(values[0])
        psi0 = vectors[:, 0]
    else:
        values, vectors = scipy.linalg.eigh(
            matrix, subset_by_index=[0, 0], driver="evr"
        )
        e0 = float(values[0])
        psi0 = vectors[:, 0]
    anchor = np.argmax(np.abs(psi0))
    if psi0[anchor] < 0:
        psi0 = -psi0
    psi0 = psi0 / np.linalg.norm(psi0)
    if full_spectrum:
        return e0, psi0, values
    return e0, psi0

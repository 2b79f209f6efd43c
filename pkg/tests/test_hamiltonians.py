import numpy as np
import pytest

from mpvmc.errors import EnumerationTooLargeError
from mpvmc.hamiltonians import (
    HeisenbergSpec,
    TfimSpec,
    connected_elements,
    dense_matrix,
    exact_ground_state,
)
from mpvmc.lattice import LatticeSpec, SpinConfiguration, enumerate_states


def tfim_chain(n, j=1.0, h=1.0, periodic=False):
    return TfimSpec(LatticeSpec.chain(n, periodic), j, h)


def heisenberg_chain(n, j=1.0, periodic=False):
    return HeisenbergSpec(LatticeSpec.chain(n, periodic), j)


class TestConnectedElements:
    def test_tfim_two_site(self):
        spec = tfim_chain(2)
        row = connected_elements(spec, SpinConfiguration.from_bits([0, 0]))
        assert row.diagonal == 1.0
        targets = {(str(x), v) for x, v in row.offdiagonal}
        assert targets == {("10", 1.0), ("01", 1.0)}

    def test_heisenberg_antiparallel(self):
        spec = heisenberg_chain(2)
        row = connected_elements(spec, SpinConfiguration.from_bits([0, 1]))
        assert row.diagonal == -1.0
        assert len(row.offdiagonal) == 1
        x, v = row.offdiagonal[0]
        assert str(x) == "10" and v == 2.0

    def test_heisenberg_aligned(self):
        spec = heisenberg_chain(2)
        row = connected_elements(spec, SpinConfiguration.from_bits([0, 0]))
        assert row.diagonal == 1.0
        assert row.offdiagonal == ()

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            connected_elements(tfim_chain(3), SpinConfiguration.from_bits([0, 0]))

    def test_offdiagonal_count_bounds(self):
        spec = tfim_chain(5)
        row = connected_elements(spec, SpinConfiguration(9, 5))
        assert len(row.offdiagonal) <= 5
        hspec = heisenberg_chain(5)
        hrow = connected_elements(hspec, SpinConfiguration(9, 5))
        assert len(hrow.offdiagonal) <= len(hspec.lattice.bonds)

    def test_heisenberg_preserves_magnetization(self):
        spec = heisenberg_chain(6, periodic=True)
        rng = np.random.default_rng(0)
        for _ in range(20):
            x = SpinConfiguration(int(rng.integers(0, 64)), 6)
            for y, _ in connected_elements(spec, x).offdiagonal:
                assert y.magnetization() == x.magnetization()


class TestDenseMatrix:
    def test_single_site_pure_field(self):
        matrix = dense_matrix(TfimSpec(LatticeSpec.chain(1), 1.0, 1.0))
        assert np.array_equal(matrix, [[0.0, 1.0], [1.0, 0.0]])

    def test_two_site_pure_ising(self):
        matrix = dense_matrix(tfim_chain(2, j=1.0, h=0.0))
        assert np.array_equal(matrix, np.diag([1.0, -1.0, -1.0, 1.0]))

    def test_rows_match_connected_elements(self):
        for spec in (tfim_chain(4, 1.0, 0.7), heisenberg_chain(4, 1.3)):
            matrix = dense_matrix(spec)
            for x in enumerate_states(4):
                row = connected_elements(spec, x)
                dense_row = np.zeros(16)
                dense_row[x.code] = row.diagonal
                for y, v in row.offdiagonal:
                    dense_row[y.code] += v
                assert np.allclose(matrix[x.code], dense_row, atol=1e-14)

    def test_symmetry_random_specs(self):
        rng = np.random.default_rng(1)
        for _ in range(5):
            j, h = rng.normal(size=2)
            matrix = dense_matrix(tfim_chain(5, j, h, periodic=True))
            assert np.array_equal(matrix, matrix.T)
        matrix = dense_matrix(heisenberg_chain(5, 0.8, periodic=True))
        assert np.array_equal(matrix, matrix.T)

    def test_guard(self):
        with pytest.raises(EnumerationTooLargeError):
            dense_matrix(tfim_chain(15))


class TestExactGroundState:
    def test_single_site(self):
        e0, psi0 = exact_ground_state(TfimSpec(LatticeSpec.chain(1), 0.0, 1.0))
        assert e0 == pytest.approx(-1.0, abs=1e-12)
        assert psi0 @ psi0 == pytest.approx(1.0)

    def test_two_site_closed_form(self):
        e0, _ = exact_ground_state(tfim_chain(2, 1.0, 1.0))
        assert e0 == pytest.approx(-np.sqrt(5.0), abs=1e-10)

    def test_heisenberg_singlet(self):
        e0, _ = exact_ground_state(heisenberg_chain(2))
        assert e0 == pytest.approx(-3.0, abs=1e-10)

    def test_sign_fix(self):
        _, psi0 = exact_ground_state(tfim_chain(4, 1.0, 0.5))
        assert psi0[np.argmax(np.abs(psi0))] > 0

    def test_energy_non_increasing_in_field(self):
        energies = [
            exact_ground_state(tfim_chain(6, 1.0, h))[0]
            for h in (0.0, 0.25, 0.5, 1.0, 2.0, 4.0)
        ]
        assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))

    def test_variational_bound(self):
        spec = tfim_chain(5, 1.0, 0.9)
        matrix = dense_matrix(spec)
        e0, _ = exact_ground_state(spec)
        rng = np.random.default_rng(2)
        for _ in range(20):
            psi = rng.normal(size=32)
            psi /= np.linalg.norm(psi)
            assert psi @ matrix @ psi >= e0 - 1e-12

    def test_full_spectrum(self):
        e0, _, spectrum = exact_ground_state(tfim_chain(3), full_spectrum=True)
        assert spectrum.shape == (8,)
        assert e0 == pytest.approx(spectrum[0])

import numpy as np
import pytest

from forgeqse.casci import (
    BasisSizeError,
    DeterminantBasis,
    casci_spectrum,
    hamiltonian_matrix,
    slater_condon_element,
    spin_squared_matrix,
)
from forgeqse.chemio import HARTREE_TO_EV, MolecularIntegrals, random_integrals
from forgeqse.operators import build_hamiltonian, fock_matrix, sector_indices, total_spin_operator


def test_single_orbital_closed_form():
    g = np.full((1, 1, 1, 1), 0.6)
    ints = MolecularIntegrals(1, 1, 1, 0.3, np.array([[-1.1]]), g)
    assert casci_spectrum(ints).energies[0] == pytest.approx(0.3 + 2 * -1.1 + 0.6)


def test_hubbard_dimer():
    t, u = 0.4, 1.3
    h = np.array([[0.0, -t], [-t, 0.0]])
    g = np.zeros((2, 2, 2, 2))
    g[0, 0, 0, 0] = g[1, 1, 1, 1] = u
    result = casci_spectrum(MolecularIntegrals(2, 1, 1, 0.0, h, g))
    root = np.sqrt(u**2 / 4 + 4 * t**2)
    assert result.energies[0] == pytest.approx(u / 2 - root)
    assert sorted(result.energies) == pytest.approx([u / 2 - root, 0.0, u, u / 2 + root])


def test_non_interacting_aufbau():
    eps = np.array([-0.9, -0.5, 0.1, 0.4])
    ints = MolecularIntegrals(4, 2, 2, 0.0, np.diag(eps), np.zeros((4, 4, 4, 4)))
    result = casci_spectrum(ints)
    assert result.energies[0] == pytest.approx(2 * (eps[0] + eps[1]))
    # first excitation promotes one electron from orbital 1 to 2, singlet and triplet degenerate
    gap = (eps[2] - eps[1]) * HARTREE_TO_EV
    excited = [s for s in result.spectrum.states[1:] if abs(s.excitation_energy - gap) < 1e-9]
    assert {s.spin for s in excited} == {0.0, 1.0}


def test_slater_condon_triple_difference_vanishes():
    ints = random_integrals(4, 4, seed=0)
    d1 = (0b0011, 0b0011)
    d2 = (0b1100, 0b0101)  # three spin orbitals moved
    assert slater_condon_element(d1, d2, ints) == 0.0


@pytest.mark.parametrize("n,ne,seed", [(1, 2, 0), (2, 2, 1), (3, 2, 2), (3, 4, 3)])
def test_matrix_matches_fock_space_action(n, ne, seed):
    ints = random_integrals(n, ne, seed=seed)
    basis = DeterminantBasis(n, ne // 2, ne // 2)
    dense = fock_matrix(build_hamiltonian(ints), n)
    idx = basis.combined()
    assert np.allclose(hamiltonian_matrix(basis, ints), dense[np.ix_(idx, idx)].real, atol=1e-12)
    s2 = fock_matrix(total_spin_operator(n), n)
    assert np.allclose(spin_squared_matrix(basis).toarray(), s2[np.ix_(idx, idx)].real, atol=1e-12)
    assert sorted(idx) == sorted(sector_indices(n, ne // 2, ne // 2))


@pytest.mark.parametrize("seed", range(3))
def test_states_have_sharp_spin_and_irrep(seed):
    ints = random_integrals(4, 4, ("A1", "B1", "B1", "A1"), seed=seed)
    result = casci_spectrum(ints)
    for s in result.spectrum.states:
        assert s.s2 == pytest.approx(s.spin * (s.spin + 1), abs=1e-8)
    det_irreps = np.array(result.basis.irreps(ints.irreps()))
    for j, s in enumerate(result.spectrum.states):
        support = np.abs(result.vectors[:, j]) > 1e-10
        assert set(det_irreps[support]) == {s.irrep}
    assert result.spectrum.ground.excitation_energy == 0.0


def test_sparse_path_matches_dense():
    ints = random_integrals(5, 4, seed=4)
    dense = casci_spectrum(ints).energies
    sparse = casci_spectrum(ints, n_states=4, dense_limit=10).energies
    assert sparse == pytest.approx(dense[:4], abs=1e-9)
    with pytest.raises(ValueError):
        casci_spectrum(ints, dense_limit=10)


def test_determinant_cap():
    with pytest.raises(BasisSizeError):
        casci_spectrum(random_integrals(4, 4, seed=0), max_determinants=10)

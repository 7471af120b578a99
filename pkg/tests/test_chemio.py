import numpy as np
import pytest

from forgeqse.casci import DeterminantBasis, casci_spectrum, hamiltonian_matrix
from forgeqse.chemio import (
    MOLPRO_C2V,
    ActiveSpaceSpec,
    ConfigurationError,
    FCIDUMPBoundsError,
    FCIDUMPError,
    MolecularIntegrals,
    UnsupportedReferenceError,
    freeze_core,
    irrep_label,
    orbital_metadata_table,
    parse_fcidump,
    random_integrals,
    write_fcidump,
)
from forgeqse.operators import irrep_product

HEADER = " &FCI NORB=2,NELEC=2,MS2=0,\n  ORBSYM=1,3,\n  ISYM=1,\n &END\n"


def test_symmetry_completion():
    text = HEADER + "\n".join(
        [
            "0.7 1 1 1 1",
            "0.3 1 1 2 2",
            "0.6 2 2 2 2",
            "0.1 1 2 1 2",
            "-1.2 1 1 0 0",
            "-0.4 2 2 0 0",
            "0.5 1 2 0 0",
            "1.5 0 0 0 0",
        ]
    )
    ints = parse_fcidump(text)
    assert ints.n_orbitals == 2 and ints.n_alpha == ints.n_beta == 1
    assert ints.h[0, 1] == ints.h[1, 0] == 0.5
    assert ints.g[1, 1, 0, 0] == 0.3
    for idx in [(0, 1, 0, 1), (1, 0, 0, 1), (0, 1, 1, 0), (1, 0, 1, 0)]:
        assert ints.g[idx] == 0.1
    assert ints.core_energy == 1.5
    assert ints.orbital_irreps == ("A1", "B1")
    assert ints.check_symmetry()


def test_fortran_exponents_and_orbsym_maps():
    text = HEADER.replace("1,3", "2,4") + "0.5D-01 1 1 0 0\n"
    assert parse_fcidump(text).h[0, 0] == pytest.approx(0.05)
    assert parse_fcidump(text, MOLPRO_C2V).orbital_irreps == ("B1", "A2")


@pytest.mark.parametrize("seed", range(5))
def test_round_trip(seed):
    ints = random_integrals(4, 4, ("A1", "B1", "B2", "A1"), seed=seed)
    again = parse_fcidump(write_fcidump(ints))
    assert again.same_as(ints)
    assert parse_fcidump(write_fcidump(again)).same_as(ints)


@pytest.mark.parametrize(
    "body,error",
    [
        ("0.1 3 1 1 1\n", FCIDUMPBoundsError),
        ("0.1 1 1\n", FCIDUMPError),
        ("abc 1 1 1 1\n", FCIDUMPError),
        ("0.1 1 0 1 0\n", FCIDUMPError),
    ],
)
def test_malformed_records(body, error):
    with pytest.raises(error):
        parse_fcidump(HEADER + body)


def test_header_errors():
    with pytest.raises(FCIDUMPError, match="line 1"):
        parse_fcidump("NORB=2\n")
    with pytest.raises(FCIDUMPError):
        parse_fcidump(" &FCI NORB=2,NELEC=2,\n")
    with pytest.raises(UnsupportedReferenceError):
        parse_fcidump(HEADER.replace("MS2=0", "MS2=2"))
    with pytest.raises(UnsupportedReferenceError):
        parse_fcidump(HEADER.replace("NELEC=2", "NELEC=3"))
    with pytest.raises(FCIDUMPError, match="ORBSYM"):
        parse_fcidump(HEADER.replace("ORBSYM=1,3", "ORBSYM=1"))


def test_integral_arrays_are_read_only():
    ints = random_integrals(2, 2, seed=0)
    with pytest.raises(ValueError):
        ints.h[0, 0] = 1.0


def test_random_integrals_respect_symmetry_rules():
    irreps = ("A1", "B1", "B2", "A2")
    ints = random_integrals(4, 4, irreps, seed=3)
    assert ints.check_symmetry()
    for p in range(4):
        for q in range(4):
            if irrep_product(irreps[p], irreps[q]) != "A1":
                assert ints.h[p, q] == 0.0
            for r in range(4):
                for s in range(4):
                    total = irrep_product(irrep_product(irreps[p], irreps[q]), irrep_product(irreps[r], irreps[s]))
                    if total != "A1":
                        assert ints.g[p, q, r, s] == 0.0
    # the two-electron tensor as a (pq),(rs) matrix is positive semidefinite
    assert np.linalg.eigvalsh(ints.g.reshape(16, 16)).min() > -1e-12


def test_freeze_nothing_is_identity():
    ints = random_integrals(3, 2, seed=1)
    same = freeze_core(ints, ActiveSpaceSpec((0, 1, 2), 2))
    assert same.same_as(ints)


def test_freeze_without_two_electron_terms():
    ints = random_integrals(3, 4, seed=2)
    bare = MolecularIntegrals(3, 2, 2, 0.25, ints.h, np.zeros((3, 3, 3, 3)))
    act = freeze_core(bare, ActiveSpaceSpec((1, 2), 2), frozen_occupied=(0,))
    assert np.array_equal(act.h, ints.h[1:, 1:])
    assert act.core_energy == pytest.approx(0.25 + 2 * ints.h[0, 0])


def test_frozen_core_matches_restricted_full_space():
    full = random_integrals(4, 4, seed=11)
    act = freeze_core(full, ActiveSpaceSpec((1, 2, 3), 2), frozen_occupied=(0,))
    # full-space determinants with orbital 0 doubly occupied
    basis = DeterminantBasis(4, 2, 2)
    dets = basis.combined()
    keep = np.flatnonzero((dets & 1) & ((dets >> 4) & 1))
    h = hamiltonian_matrix(basis, full)[np.ix_(keep, keep)]
    assert casci_spectrum(act).energies[0] == pytest.approx(np.linalg.eigvalsh(h)[0], abs=1e-10)


@pytest.mark.parametrize(
    "active,electrons,frozen",
    [((0, 1), 2, (1,)), ((0, 1), 2, (5,)), ((0, 1), 4, (2,)), ((0, 1), 2, (2, 2))],
)
def test_inconsistent_active_spaces(active, electrons, frozen):
    full = random_integrals(4, 4, seed=0)
    with pytest.raises(ConfigurationError):
        freeze_core(full, ActiveSpaceSpec(active, electrons), frozen)


def test_active_space_spec_validation():
    with pytest.raises(ConfigurationError):
        ActiveSpaceSpec((2, 1), 2)
    with pytest.raises(ConfigurationError):
        ActiveSpaceSpec((0, 1), 3)
    with pytest.raises(ConfigurationError):
        ActiveSpaceSpec((0,), 4)


@pytest.mark.parametrize(
    "molecule,record",
    [
        ("furan", (12, "b1", 2, "pi", -17.251)),
        ("pyrimidine", (20, "b2", 2, "n", -11.352)),
        ("pyridine", (51, "b1", 0, "pi*", 8.873)),
    ],
)
def test_orbital_metadata(molecule, record):
    rows = {(r.index, r.irrep, r.occupancy, r.character, r.energy_ev) for r in orbital_metadata_table(molecule)}
    assert record in rows


def test_orbital_metadata_unknown_molecule():
    with pytest.raises(LookupError):
        orbital_metadata_table("benzene")
    assert irrep_label("b2") == "B2"
    with pytest.raises(ValueError):
        irrep_label("e1")

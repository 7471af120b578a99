"""Complete active-space CI over Slater determinants: the reference spectrum."""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from . import kernels
from .chemio import MolecularIntegrals
from .operators import irrep_of
from .spectrum import LabeledSpectrum, spin_from_s2

DENSE_LIMIT = 2000
DETERMINANT_CAP = 1_000_000
DEGENERACY_TOL = 1e-9


class BasisSizeError(ValueError):
    pass


def _strings(n: int, k: int) -> list[int]:
    return [sum(1 << i for i in occ) for occ in itertools.combinations(range(n), k)]


@dataclass(frozen=True)
class DeterminantBasis:
    """All (alpha, beta) occupation strings; each spin's strings in lexicographic
    order of their occupied-orbital tuples, alpha major."""

    n_orbitals: int
    n_alpha: int
    n_beta: int

    @property
    def alpha_strings(self) -> list[int]:
        return _strings(self.n_orbitals, self.n_alpha)

    @property
    def beta_strings(self) -> list[int]:
        return _strings(self.n_orbitals, self.n_beta)

    @property
    def size(self) -> int:
        return math.comb(self.n_orbitals, self.n_alpha) * math.comb(self.n_orbitals, self.n_beta)

    def determinants(self) -> list[tuple[int, int]]:
        return [(a, b) for a in self.alpha_strings for b in self.beta_strings]

    def combined(self) -> np.ndarray:
        """Bitstrings with alpha in the low N bits and beta in the high N bits."""
        n = self.n_orbitals
        return np.array([a | (b << n) for a, b in self.determinants()], dtype=np.int64)

    def irreps(self, orbital_irreps) -> list[str]:
        n = self.n_orbitals
        out = []
        for a, b in self.determinants():
            occ = [p for p in range(n) if (a >> p) & 1] + [p for p in range(n) if (b >> p) & 1]
            out.append(irrep_of(occ, orbital_irreps))
        return out


def slater_condon_element(det1: tuple[int, int], det2: tuple[int, int], ints: MolecularIntegrals) -> float:
    """<det2|H|det1> in Hartree, including the core energy on the diagonal.

    Determinants are (alpha bits, beta bits) with orbital p in bit p.
    """
    n = ints.n_orbitals
    d1 = det1[0] | (det1[1] << n)
    d2 = det2[0] | (det2[1] << n)
    val = float(kernels.slater_condon(d1, d2, ints.h, ints.g, n))
    return val + ints.core_energy if d1 == d2 else val


def hamiltonian_matrix(basis: DeterminantBasis, ints: MolecularIntegrals, dense: bool = True):
    rows, cols, vals = kernels.casci_elements(basis.combined(), ints.h, ints.g, ints.n_orbitals)
    h = sp.coo_matrix((vals, (rows, cols)), shape=(basis.size, basis.size)).tocsr()
    h = h + ints.core_energy * sp.identity(basis.size, format="csr")
    return h.toarray() if dense else h


def _ladder_sign(state: int, mode: int) -> int:
    return -1 if bin(state & ((1 << mode) - 1)).count("1") & 1 else 1


def spin_squared_matrix(basis: DeterminantBasis) -> sp.csr_matrix:
    """S^2 = S_z(S_z + 1) + S_- S_+ on the determinant basis, by direct bit action."""
    n = basis.n_orbitals
    dets = basis.combined()
    index = {int(d): i for i, d in enumerate(dets)}
    sz = 0.5 * (basis.n_alpha - basis.n_beta)
    rows, cols, vals = [], [], []
    for col, d in enumerate(dets):
        d = int(d)
        alpha, beta = d & ((1 << n) - 1), d >> n
        # p == q part of S_- S_+ counts beta electrons without an alpha partner
        diag = sz * (sz + 1) + bin(beta & ~alpha).count("1")
        rows.append(col)
        cols.append(col)
        vals.append(diag)
        for q in range(n):
            if not ((beta >> q) & 1) or (alpha >> q) & 1:
                continue
            for p in range(n):
                if p == q or not ((alpha >> p) & 1) or (beta >> p) & 1:
                    continue
                # a+_{p beta} a_{p alpha} a+_{q alpha} a_{q beta}
                s, sign = d, 1
                for mode in (n + q, q, p, n + p):
                    sign *= _ladder_sign(s, mode)
                    s ^= 1 << mode
                rows.append(index[s])
                cols.append(col)
                vals.append(float(sign))
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.size, basis.size))


@dataclass
class CASCIResult:
    spectrum: LabeledSpectrum
    energies: np.ndarray
    vectors: np.ndarray
    basis: DeterminantBasis


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    nz = np.flatnonzero(np.abs(vec) > 1e-12)
    return -vec if nz.size and vec[nz[0]] < 0 else vec


def casci_spectrum(
    ints: MolecularIntegrals,
    n_alpha: int | None = None,
    n_beta: int | None = None,
    n_states: int | None = None,
    max_determinants: int = DETERMINANT_CAP,
    dense_limit: int = DENSE_LIMIT,
) -> CASCIResult:
    """Lowest CASCI states labeled by spin and irrep.

    The Hamiltonian is diagonalized separately in each irrep block of the
    determinant basis, so every state has a definite irrep; degenerate levels
    inside a block are resolved into S^2 eigenstates.  ``n_states=None``
    returns every state when the basis is small enough for dense
    diagonalization.
    """
    na = ints.n_alpha if n_alpha is None else n_alpha
    nb = ints.n_beta if n_beta is None else n_beta
    basis = DeterminantBasis(ints.n_orbitals, na, nb)
    if basis.size > max_determinants:
        raise BasisSizeError(f"{basis.size} determinants exceed the cap of {max_determinants}")
    dense = basis.size <= dense_limit
    if n_states is None and not dense:
        raise ValueError("n_states is required above the dense-diagonalization limit")
    h = hamiltonian_matrix(basis, ints, dense=False)
    s2 = spin_squared_matrix(basis)
    det_irreps = np.array(basis.irreps(ints.irreps()))

    levels, vectors, energies = [], [], []
    for irrep in sorted(set(det_irreps)):
        idx = np.flatnonzero(det_irreps == irrep)
        hb = h[idx][:, idx]
        if dense or idx.size <= dense_limit:
            w, v = np.linalg.eigh(hb.toarray())
            if n_states is not None:
                w, v = w[:n_states], v[:, :n_states]
        else:
            k = min(n_states, idx.size - 1)
            w, v = eigsh(hb, k=k, which="SA", tol=1e-12)
            order = np.argsort(w)
            w, v = w[order], v[:, order]
        s2b = s2[idx][:, idx]
        start = 0
        while start < len(w):
            stop = start + 1
            while stop < len(w) and w[stop] - w[start] < DEGENERACY_TOL:
                stop += 1
            block = v[:, start:stop]
            if stop - start > 1:
                sw, sv = np.linalg.eigh(block.T @ (s2b @ block))
                block = block @ sv
            for j in range(block.shape[1]):
                vec = _fix_sign(block[:, j])
                s2val = float(vec @ (s2b @ vec))
                dominant = np.argsort(-np.abs(vec))[:5]
                lead = np.abs(vec[dominant[0]])
                mixed = {det_irreps[idx][i] for i in dominant if np.abs(vec[i]) > 1e-6 * lead}
                if mixed != {irrep}:
                    warnings.warn(f"irrep assignment ambiguous for a state in block {irrep}")
                full = np.zeros(basis.size)
                full[idx] = vec
                levels.append((float(w[start]), spin_from_s2(s2val), irrep, s2val))
                vectors.append(full)
                energies.append(float(w[start]) if stop - start == 1 else float(block[:, j] @ (hb @ block[:, j])))
            start = stop
    # use the per-vector energies (degenerate clusters were rotated)
    levels = [(e, s, r, s2v) for e, (_, s, r, s2v) in zip(energies, levels)]
    order = sorted(range(len(levels)), key=lambda i: (round(levels[i][0], 9), levels[i][1], levels[i][2]))
    if n_states is not None:
        order = order[:n_states]
    spectrum = LabeledSpectrum.from_levels([levels[i] for i in order], method="casci")
    return CASCIResult(
        spectrum,
        np.array([levels[i][0] for i in order]),
        np.array([vectors[i] for i in order]).T,
        basis,
    )

"""Subspace expansion around a forged ground state.

Excited states are sought in ``span{E_mu |Psi>}`` with ``E_mu`` the identity
and all spin-resolved single and double excitations of the reference
bitstring.  Every element factorizes as ``s_mu F_alpha (x) F_beta`` over the two
registers, and every operator of interest (H, 1, S^2) as ``sum_t A_t (x) B_t``,
so each matrix entry is a Schmidt-weighted sum of products of register
matrix elements.
"""

from __future__ import annotations

import functools
import itertools
import math
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

from .chemio import HARTREE_TO_EV
from .forging import (
    DEFAULT_SHOTS,
    ForgedAnsatz,
    PauliEstimates,
    estimate_paulis,
    forged_matrix_element,
    matrix_elements,
    register_states,
)
from .operators import (
    ALPHA,
    BETA,
    CREATE,
    DESTROY,
    FermionOperator,
    bipartition,
    irrep_of,
    ladder_string_matrix,
    pauli_matrix,
    register_decomposition,
    total_spin_operator,
)
from .spectrum import LabeledSpectrum

EPS_M_EXACT = 1e-8
EPS_S = 0.1
DEFAULT_RESAMPLES = 200
DEFAULT_REPLICATES = 64


class DegenerateSubspaceWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# Basis


@dataclass(frozen=True)
class Excitation:
    """``kind`` is identity, single or double; ``factors`` are (orbital, spin, kind)
    ladder operators in application order right-to-left."""

    kind: str
    factors: tuple
    irrep: str
    sign: int = 1
    alpha: tuple = ()
    beta: tuple = ()

    @property
    def key(self) -> tuple:
        return (("identity", "single", "double").index(self.kind), self.factors)

    def operator(self) -> FermionOperator:
        if not self.factors:
            return FermionOperator.identity()
        return FermionOperator.term(1.0, *self.factors)

    def describe(self) -> str:
        if not self.factors:
            return "1"
        return " ".join(f"{'+' if k == CREATE else '-'}{o}{'ab'[s]}" for o, s, k in self.factors)


def _make(kind, factors, irreps, ref_irrep):
    orbitals = [o for o, _, _ in factors]
    # factors are already alpha-first, so no reordering sign arises
    alpha = tuple((o, k) for o, s, k in factors if s == ALPHA)
    beta = tuple((o, k) for o, s, k in factors if s == BETA)
    return Excitation(kind, tuple(factors), irrep_of(orbitals, irreps, ref_irrep), 1, alpha, beta)


@dataclass
class ExcitationBasis:
    elements: list[Excitation]
    reference: str
    n_orbitals: int

    def __len__(self):
        return len(self.elements)

    def irreps(self) -> list[str]:
        return [e.irrep for e in self.elements]


def build_excitation_basis(reference: str, orbital_irreps: Sequence[str] = (), reference_irrep: str = "A1") -> ExcitationBasis:
    """Identity, spin-resolved singles and canonical doubles of a bitstring.

    Same-spin doubles use a < b and i < j; opposite-spin doubles pair an alpha
    single with a beta single.
    """
    n = len(reference)
    irreps = tuple(orbital_irreps) or ("A1",) * n
    occ = [p for p in range(n) if reference[p] == "1"]
    vir = [p for p in range(n) if reference[p] == "0"]
    c, d = CREATE, DESTROY
    els = [Excitation("identity", (), reference_irrep)]
    for s in (ALPHA, BETA):
        for i in occ:
            for a in vir:
                els.append(_make("single", ((a, s, c), (i, s, d)), irreps, reference_irrep))
    for s in (ALPHA, BETA):
        for i, j in itertools.combinations(occ, 2):
            for a, b in itertools.combinations(vir, 2):
                els.append(_make("double", ((a, s, c), (b, s, c), (j, s, d), (i, s, d)), irreps, reference_irrep))
    for i in occ:
        for a in vir:
            for j in occ:
                for b in vir:
                    els.append(
                        _make("double", ((a, ALPHA, c), (i, ALPHA, d), (b, BETA, c), (j, BETA, d)), irreps, reference_irrep)
                    )
    keys = [e.key for e in els]
    if len(set(keys)) != len(keys):
        raise AssertionError("duplicate excitation in basis")
    return ExcitationBasis(els, reference, n)


# ---------------------------------------------------------------------------
# Matrices


@dataclass
class SubspaceMatrices:
    H: np.ndarray
    M: np.ndarray
    S: np.ndarray
    sigma_H: np.ndarray
    sigma_M: np.ndarray
    sigma_S: np.ndarray
    replicates: list = field(default_factory=list)
    mode: str = "exact"

    @property
    def size(self) -> int:
        return self.H.shape[0]

    def symmetrized(self) -> "SubspaceMatrices":
        sym = lambda a: 0.5 * (a + a.conj().T)
        return SubspaceMatrices(
            sym(self.H), sym(self.M), sym(self.S), self.sigma_H, self.sigma_M, self.sigma_S, self.replicates, self.mode
        )


def qse_operators(n: int, hamiltonian: FermionOperator) -> dict[str, FermionOperator]:
    return {"H": hamiltonian, "M": FermionOperator.identity(), "S": total_spin_operator(n)}


class _Layout:
    """Register factor bookkeeping shared by all assembly routes."""

    def __init__(self, basis: ExcitationBasis):
        n = basis.n_orbitals
        self.factors: list[tuple] = [()]
        where = {(): 0}
        fa, fb, sign = [], [], []
        for e in basis.elements:
            for part, out in ((e.alpha, fa), (e.beta, fb)):
                if part not in where:
                    where[part] = len(self.factors)
                    self.factors.append(part)
                out.append(where[part])
            sign.append(e.sign)
        self.fa = np.array(fa)
        self.fb = np.array(fb)
        self.sign = np.array(sign, dtype=float)
        self.mats = [ladder_string_matrix(f, n).astype(complex) for f in self.factors]


def _entries_from_vectors(layout, terms, vecs, schmidt):
    """Exact route: vecs[f][k] = F_f u_k."""
    nf, kk = len(layout.factors), len(schmidt)
    v = np.array(vecs)  # (nf, K, dim)
    flat = v.reshape(nf * kk, -1)
    w = np.outer(schmidt, schmidt)
    d = len(layout.fa)
    out = np.zeros((d, d), dtype=complex)
    for a_t, b_t in terms:
        xa = (flat.conj() @ (a_t @ flat.T)).reshape(nf, kk, nf, kk)
        xb = (flat.conj() @ (b_t @ flat.T)).reshape(nf, kk, nf, kk)
        xa = xa[layout.fa[:, None], :, layout.fa[None, :], :]  # (d, d, K, K)
        xb = xb[layout.fb[:, None], :, layout.fb[None, :], :]
        out += np.einsum("kl,mnkl,mnkl->mn", w, xa, xb)
    return out * np.outer(layout.sign, layout.sign)


def _register_elements(dense_factors, a_t, rhos):
    """X[f, k, g, l] = Tr(F_f^dag A F_g rho_lk) with rho_lk ~ |u_l><u_k|."""
    af = np.einsum("ij,gjm->gim", a_t.toarray(), dense_factors)
    y = np.einsum("gij,lkjm->glkim", af, rhos)
    return np.einsum("fim,glkim->fkgl", dense_factors.conj(), y)


def _entries_from_rhos(layout, terms, rhos, schmidt):
    """Tomographic route: rhos[l, k] reconstructs |u_l><u_k| from Pauli estimates."""
    w = np.outer(schmidt, schmidt)
    dense = np.array([f.toarray() for f in layout.mats])
    d = len(layout.fa)
    out = np.zeros((d, d), dtype=complex)
    for a_t, b_t in terms:
        xa = _register_elements(dense, a_t, rhos)
        xb = _register_elements(dense, b_t, rhos)
        xa = xa[layout.fa[:, None], :, layout.fa[None, :], :]
        xb = xb[layout.fb[:, None], :, layout.fb[None, :], :]
        out += np.einsum("kl,mnkl,mnkl->mn", w, xa, xb)
    return out * np.outer(layout.sign, layout.sign)


def all_pauli_strings(n: int) -> list[tuple[int, int]]:
    return [(x, z) for x in range(1 << n) for z in range(1 << n)]


def reconstruct_rhos(estimates: PauliEstimates, n: int, n_bitstrings: int) -> np.ndarray:
    """rho[l, k] = sum_P <u_k|P|u_l> P / 2^n over a complete string set."""
    table = matrix_elements(estimates, n_bitstrings)
    dim = 1 << n
    paulis = _pauli_stack(tuple(table.strings), n)
    rhos = np.einsum("skl,sij->lkij", table.values, paulis)
    return rhos / dim


@functools.lru_cache(maxsize=8)
def _pauli_stack(strings: tuple, n: int) -> np.ndarray:
    return np.array([pauli_matrix(x, z, n).toarray() for x, z in strings])


def _fermion_terms(n, ops):
    return {name: register_decomposition(op, n) for name, op in ops.items()}


def assemble_matrices(
    ansatz: ForgedAnsatz,
    basis: ExcitationBasis,
    hamiltonian: FermionOperator,
    mode: str = "exact",
    route: str = "registers",
    seed: int | None = None,
    shots: int = DEFAULT_SHOTS,
    estimator=None,
    n_replicates: int = DEFAULT_REPLICATES,
    threads: int = 1,
) -> SubspaceMatrices:
    """H, M and S^2 in the excitation basis, <Psi|E_mu^dag O E_nu|Psi>.

    Routes: ``registers`` contracts register matrices with U|x_k> (exact) or
    with register operators rebuilt from tomographically complete Pauli
    estimates (sampled/noisy); ``symbolic`` normal-orders every product
    operator, bipartitions it and evaluates it with the forged expectation
    (exact only; slow, meant for cross-checks).
    """
    n = ansatz.n_qubits
    if basis.n_orbitals != n:
        raise ValueError("excitation basis and ansatz act on different orbital counts")
    ops = qse_operators(n, hamiltonian)
    d = len(basis)
    zeros = np.zeros((d, d))
    if route == "symbolic":
        if mode != "exact":
            raise ValueError("the symbolic route is exact-only")
        mats = {}
        for name, op in ops.items():
            m = np.zeros((d, d), dtype=complex)
            for mu, e_mu in enumerate(basis.elements):
                left = e_mu.operator().adjoint() * op
                for nu in range(mu, d):
                    prod = left * basis.elements[nu].operator()
                    m[mu, nu] = forged_matrix_element(ansatz, bipartition(prod, n)) if len(prod) else 0.0
                    m[nu, mu] = np.conj(m[mu, nu])
            mats[name] = m
        return SubspaceMatrices(mats["H"], mats["M"], mats["S"], zeros, zeros.copy(), zeros.copy())
    if route != "registers":
        raise ValueError(f"unknown assembly route {route!r}")
    layout = _Layout(basis)
    terms = _fermion_terms(n, ops)
    lam = np.asarray(ansatz.schmidt)
    if mode == "exact":
        us = register_states(ansatz)
        vecs = [[f @ u for u in us] for f in layout.mats]
        mats = {name: _entries_from_vectors(layout, t, vecs, lam) for name, t in terms.items()}
        return SubspaceMatrices(mats["H"], mats["M"], mats["S"], zeros, zeros.copy(), zeros.copy()).symmetrized()

    est = estimate_paulis(
        ansatz, all_pauli_strings(n), mode, seed=seed, estimator=estimator, shots=shots, threads=threads
    )

    def build(e):
        rhos = reconstruct_rhos(e, n, ansatz.n_bitstrings)
        m = {name: _entries_from_rhos(layout, t, rhos, lam) for name, t in terms.items()}
        return [0.5 * (m[x] + m[x].conj().T) for x in ("H", "M", "S")]

    central = build(est)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(0x5E,)))
    reps = [build(est.replicate(rng)) for _ in range(n_replicates)]
    sig = [np.std(np.array([r[i] for r in reps]).real, axis=0, ddof=1) for i in range(3)]
    return SubspaceMatrices(*central, *sig, replicates=reps, mode=mode)


def assemble_matrices_oracle(
    state: np.ndarray, basis: ExcitationBasis, hamiltonian: FermionOperator
) -> SubspaceMatrices:
    """Same matrices for an arbitrary 2N-qubit state (alpha register in the low bits)."""
    n = basis.n_orbitals
    psi = np.asarray(state, dtype=complex)
    if psi.shape != (1 << 2 * n,):
        raise ValueError("state size does not match the excitation basis")
    layout = _Layout(basis)
    vecs = [
        s * (sp.kron(layout.mats[b], layout.mats[a]) @ psi) for a, b, s in zip(layout.fa, layout.fb, layout.sign)
    ]
    out = []
    for name, op in qse_operators(n, hamiltonian).items():
        full = sum(sp.kron(b_t, a_t) for a_t, b_t in register_decomposition(op, n))
        out.append(np.array([[np.vdot(vm, full @ vn) for vn in vecs] for vm in vecs]))
    z = np.zeros((len(basis), len(basis)))
    return SubspaceMatrices(*out, z, z.copy(), z.copy()).symmetrized()


# ---------------------------------------------------------------------------
# Classification


@dataclass
class ClassifiedState:
    energy: float
    spin: int
    irrep: str
    s2: float
    vector: np.ndarray


@dataclass
class Classification:
    states: list[ClassifiedState]
    spin_bases: dict  # (irrep, S) -> coefficient matrix in the excitation basis
    dropped: int = 0


def _allowed_spin(value: float, eps_s: float) -> int | None:
    s = int(round(0.5 * (math.sqrt(1.0 + 4.0 * max(value, 0.0)) - 1.0)))
    return s if abs(s * (s + 1) - value) < eps_s else None


def sampled_eps_m(matrices: SubspaceMatrices) -> float:
    return max(EPS_M_EXACT, 3.0 * float(np.median(matrices.sigma_M)))


def classify(
    matrices: SubspaceMatrices, basis: ExcitationBasis, eps_m: float | None = None, eps_s: float = EPS_S
) -> Classification:
    """Irrep blocks -> canonical orthogonalization -> S^2 clusters -> H eigenstates."""
    if eps_m is None:
        eps_m = EPS_M_EXACT if matrices.mode == "exact" else sampled_eps_m(matrices)
    irreps = np.array(basis.irreps())
    states, spin_bases, dropped = [], {}, 0
    for irrep in sorted(set(irreps)):
        idx = np.flatnonzero(irreps == irrep)
        m = matrices.M[np.ix_(idx, idx)]
        w, v = np.linalg.eigh(m)
        keep = w > eps_m
        if not keep.any():
            warnings.warn(f"no retained vectors in irrep block {irrep}", DegenerateSubspaceWarning)
            continue
        x = v[:, keep] / np.sqrt(w[keep])
        s_t = x.conj().T @ matrices.S[np.ix_(idx, idx)] @ x
        sw, sv = np.linalg.eigh(0.5 * (s_t + s_t.conj().T))
        spins = [_allowed_spin(val, eps_s) for val in sw]
        n_bad = sum(s is None for s in spins)
        if n_bad:
            dropped += n_bad
            warnings.warn(f"{n_bad} vectors in irrep {irrep} have no sharp spin and were dropped")
        for spin in sorted({s for s in spins if s is not None}):
            cols = [j for j, s in enumerate(spins) if s == spin]
            z = x @ sv[:, cols]
            h_t = z.conj().T @ matrices.H[np.ix_(idx, idx)] @ z
            hw, hv = np.linalg.eigh(0.5 * (h_t + h_t.conj().T))
            full = np.zeros((len(basis), len(cols)), dtype=complex)
            full[idx] = z
            spin_bases[(irrep, spin)] = full
            for j in range(len(hw)):
                c = full @ hv[:, j]
                s2 = float((c.conj() @ matrices.S @ c).real)
                states.append(ClassifiedState(float(hw[j]), spin, irrep, s2, c))
    if not states:
        raise ValueError("subspace expansion retained no states")
    return Classification(states, spin_bases, dropped)


def block_and_classify(
    matrices: SubspaceMatrices,
    basis: ExcitationBasis,
    eps_m: float | None = None,
    eps_s: float = EPS_S,
    method: str = "qse",
) -> LabeledSpectrum:
    cl = classify(matrices, basis, eps_m, eps_s)
    return LabeledSpectrum.from_levels(
        [(s.energy, float(s.spin), s.irrep, s.s2) for s in cl.states],
        method=method,
        metadata={"dropped_vectors": cl.dropped},
    )


def superselection_leakage(
    matrices: SubspaceMatrices, basis: ExcitationBasis, eps_m: float | None = None, eps_s: float = EPS_S
) -> dict:
    """Largest H/M entries that symmetry forbids: across irreps (raw basis) and
    across spin eigenspaces within an irrep (orthogonalized basis)."""
    irreps = np.array(basis.irreps())
    cross = irreps[:, None] != irreps[None, :]
    out = {
        "cross_irrep_H": float(np.abs(matrices.H[cross]).max(initial=0.0)),
        "cross_irrep_M": float(np.abs(matrices.M[cross]).max(initial=0.0)),
        "cross_spin_H": 0.0,
        "cross_spin_M": 0.0,
    }
    cl = classify(matrices, basis, eps_m, eps_s)
    for (r1, s1), z1 in cl.spin_bases.items():
        for (r2, s2), z2 in cl.spin_bases.items():
            if r1 == r2 and s1 != s2:
                out["cross_spin_H"] = max(out["cross_spin_H"], float(np.abs(z1.conj().T @ matrices.H @ z2).max()))
                out["cross_spin_M"] = max(out["cross_spin_M"], float(np.abs(z1.conj().T @ matrices.M @ z2).max()))
    return out


# ---------------------------------------------------------------------------
# Uncertainty and reporting


def _perturbed(matrices: SubspaceMatrices, rng: np.random.Generator) -> SubspaceMatrices:
    def draw(a, s):
        noise = np.triu(rng.normal(size=a.shape) * s)
        noise = noise + np.triu(noise, 1).T
        return a + noise

    return SubspaceMatrices(
        draw(matrices.H, matrices.sigma_H),
        draw(matrices.M, matrices.sigma_M),
        draw(matrices.S, matrices.sigma_S),
        matrices.sigma_H,
        matrices.sigma_M,
        matrices.sigma_S,
        mode=matrices.mode,
    )


def _spread(reference: LabeledSpectrum, samples: list[LabeledSpectrum], min_fraction: float = 0.9):
    values: dict = {s.key: [] for s in reference.states}
    for spec in samples:
        got = spec.by_key()
        for key in values:
            if key in got:
                values[key].append(got[key].excitation_energy)
    sigmas, unstable = {}, []
    for key, v in values.items():
        if len(v) < min_fraction * len(samples):
            unstable.append(key)
        sigmas[key] = float(np.std(v, ddof=1)) if len(v) > 1 else 0.0
    return sigmas, unstable


def bootstrap_uncertainty(
    matrices: SubspaceMatrices,
    basis: ExcitationBasis,
    n_resamples: int = DEFAULT_RESAMPLES,
    seed: int = 0,
    eps_m: float | None = None,
    eps_s: float = EPS_S,
) -> tuple[dict, list]:
    """Excitation-energy sigma (eV) per (S, irrep, ordinal) from entrywise normal resampling.

    States missing from more than 10% of resamples are returned as unstable.
    """
    reference = block_and_classify(matrices, basis, eps_m, eps_s)
    if not (matrices.sigma_H.any() or matrices.sigma_M.any() or matrices.sigma_S.any()):
        return {s.key: 0.0 for s in reference.states}, []
    rng = np.random.default_rng(seed)
    samples = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for _ in range(n_resamples):
            try:
                samples.append(block_and_classify(_perturbed(matrices, rng), basis, eps_m, eps_s))
            except ValueError:
                continue
    return _spread(reference, samples)


def replicate_uncertainty(
    matrices: SubspaceMatrices, basis: ExcitationBasis, eps_m: float | None = None, eps_s: float = EPS_S
) -> tuple[dict, list]:
    """Excitation-energy sigma (eV) from whole-matrix replicates that keep the
    correlations between entries sharing the same measurements."""
    reference = block_and_classify(matrices, basis, eps_m, eps_s)
    if not matrices.replicates:
        return {s.key: 0.0 for s in reference.states}, []
    if eps_m is None and matrices.mode != "exact":
        eps_m = sampled_eps_m(matrices)
    samples = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for h, m, s in matrices.replicates:
            rep = SubspaceMatrices(h, m, s, matrices.sigma_H, matrices.sigma_M, matrices.sigma_S, mode=matrices.mode)
            try:
                samples.append(block_and_classify(rep, basis, eps_m, eps_s))
            except ValueError:
                continue
    return _spread(reference, samples)


def chi_squared(deviations: Sequence[float], sigmas: Sequence[float]) -> float:
    """sum_i (dd_i / sigma_i)^2 / n."""
    dev = np.asarray(deviations, dtype=float)
    sig = np.asarray(sigmas, dtype=float)
    if dev.shape != sig.shape or dev.size == 0:
        raise ValueError("need equal-length, non-empty deviation and sigma lists")
    if np.any(sig <= 0):
        raise ValueError("all sigmas must be positive")
    return float(np.sum((dev / sig) ** 2) / dev.size)


def excitation_report(spectrum: LabeledSpectrum, shots: int | None = None) -> list[dict]:
    """Rows of (label, excitation energy in eV, sigma in eV) ground state first."""
    e0 = spectrum.ground.energy
    rows = []
    for s in spectrum.states:
        rows.append(
            {
                "label": s.label,
                "spin": s.spin,
                "irrep": s.irrep,
                "ordinal": s.ordinal,
                "excitation_energy_ev": 0.0 if s is spectrum.ground else (s.energy - e0) * HARTREE_TO_EV,
                "sigma_ev": s.sigma,
                "shots": shots,
            }
        )
    return rows

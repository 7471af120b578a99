"""Second-quantized operators, Jordan-Wigner mapping and the alpha/beta bipartition.

Mode ordering convention: all alpha spatial orbitals ``0..N-1`` precede all beta
orbitals, so in a 2N-qubit register mode ``(p, spin)`` sits on qubit ``spin*N + p``.
Pauli strings are stored as ``(x, z)`` bit masks with ``P(x, z) = i^{|x&z|} X^x Z^z``,
which makes ``Y = iXZ``.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
import scipy.sparse as sp

ALPHA, BETA = 0, 1
DESTROY, CREATE = 0, 1
DROP_TOL = 1e-12

Factor = tuple  # (orbital, spin, kind)


def _popcount(x: int) -> int:
    return bin(x).count("1")


# ---------------------------------------------------------------------------
# Fermion operators


def _sort_key(f: Factor):
    orbital, spin, kind = f
    return (-kind, spin, orbital)


def _normal_order_term(coef: complex, factors: tuple) -> dict:
    """Normal-order one product of ladder operators.

    Creations go left of destructions; within each group modes are ascending
    in (spin, orbital).  Returns a dict of canonical factor tuples.
    """
    out: dict = defaultdict(complex)
    stack = [(coef, list(factors))]
    while stack:
        c, fs = stack.pop()
        for i in range(len(fs) - 1):
            a, b = fs[i], fs[i + 1]
            if _sort_key(a) > _sort_key(b):
                swapped = fs[:i] + [b, a] + fs[i + 2 :]
                if a[2] == DESTROY and b[2] == CREATE and a[:2] == b[:2]:
                    stack.append((c, fs[:i] + fs[i + 2 :]))
                stack.append((-c, swapped))
                break
            if a == b:
                break  # a a = 0 and a^dag a^dag = 0
        else:
            out[tuple(fs)] += c
            continue
    return out


class FermionOperator:
    """Linear combination of normal-ordered ladder-operator products."""

    __slots__ = ("terms",)

    def __init__(self, terms: Mapping[tuple, complex] | None = None, _ordered: bool = False):
        merged: dict = defaultdict(complex)
        for factors, coef in (terms or {}).items():
            if _ordered:
                merged[factors] += coef
            else:
                for f, c in _normal_order_term(coef, tuple(factors)).items():
                    merged[f] += c
        self.terms = {f: c for f, c in merged.items() if abs(c) > DROP_TOL}

    @classmethod
    def term(cls, coef: complex, *factors: Factor) -> "FermionOperator":
        return cls({tuple(factors): coef})

    @classmethod
    def identity(cls, coef: complex = 1.0) -> "FermionOperator":
        return cls({(): coef})

    def __add__(self, other):
        if not isinstance(other, FermionOperator):
            other = FermionOperator.identity(other)
        merged = dict(self.terms)
        for f, c in other.terms.items():
            merged[f] = merged.get(f, 0.0) + c
        return FermionOperator(merged, _ordered=True)

    __radd__ = __add__

    def __neg__(self):
        return FermionOperator({f: -c for f, c in self.terms.items()}, _ordered=True)

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, other):
        if isinstance(other, FermionOperator):
            prods: dict = defaultdict(complex)
            for f1, c1 in self.terms.items():
                for f2, c2 in other.terms.items():
                    prods[f1 + f2] += c1 * c2
            return FermionOperator(prods)
        return FermionOperator({f: c * other for f, c in self.terms.items()}, _ordered=True)

    def __rmul__(self, scalar):
        return FermionOperator({f: c * scalar for f, c in self.terms.items()}, _ordered=True)

    def adjoint(self) -> "FermionOperator":
        return FermionOperator(
            {tuple((o, s, 1 - k) for (o, s, k) in reversed(f)): np.conj(c) for f, c in self.terms.items()}
        )

    def spins(self) -> set:
        return {s for f in self.terms for (_, s, _) in f}

    def __len__(self):
        return len(self.terms)

    def __repr__(self):
        return f"FermionOperator({len(self.terms)} terms)"


def cre(p: int, spin: int) -> FermionOperator:
    return FermionOperator.term(1.0, (p, spin, CREATE))


def des(p: int, spin: int) -> FermionOperator:
    return FermionOperator.term(1.0, (p, spin, DESTROY))


def number_operator(n: int, spin: int | None = None) -> FermionOperator:
    spins = (ALPHA, BETA) if spin is None else (spin,)
    return FermionOperator(
        {((p, s, CREATE), (p, s, DESTROY)): 1.0 for p in range(n) for s in spins}, _ordered=True
    )


def build_hamiltonian(ints) -> FermionOperator:
    """E_core + sum h_pq a+_ps a_qs + 1/2 sum (pr|qs) a+_ps a+_qt a_st a_rs."""
    n = ints.n_orbitals
    terms: dict = defaultdict(complex)
    terms[()] += ints.core_energy
    h, g = ints.h, ints.g
    for p in range(n):
        for q in range(n):
            if h[p, q] != 0.0:
                for s in (ALPHA, BETA):
                    terms[((p, s, CREATE), (q, s, DESTROY))] += h[p, q]
    nz = np.argwhere(g != 0.0)
    for p, r, q, s in nz:
        v = 0.5 * g[p, r, q, s]
        for sig in (ALPHA, BETA):
            for tau in (ALPHA, BETA):
                terms[((p, sig, CREATE), (q, tau, CREATE), (s, tau, DESTROY), (r, sig, DESTROY))] += v
    return FermionOperator(terms)


def total_spin_operator(n: int) -> FermionOperator:
    """S^2 = S_- S_+ + S_z (S_z + 1)."""
    s_plus = FermionOperator({((p, ALPHA, CREATE), (p, BETA, DESTROY)): 1.0 for p in range(n)})
    s_minus = s_plus.adjoint()
    s_z = 0.5 * (number_operator(n, ALPHA) - number_operator(n, BETA))
    return s_minus * s_plus + s_z * s_z + s_z


# ---------------------------------------------------------------------------
# C2v irreps

_IRREP_BITS = {"A1": 0, "B1": 1, "B2": 2, "A2": 3}
_BITS_IRREP = {v: k for k, v in _IRREP_BITS.items()}


def irrep_product(r1: str, r2: str) -> str:
    try:
        return _BITS_IRREP[_IRREP_BITS[r1.upper()] ^ _IRREP_BITS[r2.upper()]]
    except KeyError as exc:
        raise ValueError(f"unknown C2v irrep {exc.args[0]!r}") from None


def irrep_of(orbitals: Iterable[int], orbital_irreps, start: str = "A1") -> str:
    out = start
    for p in orbitals:
        out = irrep_product(out, orbital_irreps[p])
    return out


# ---------------------------------------------------------------------------
# Pauli algebra


_LETTER = {(0, 0): "I", (1, 0): "X", (0, 1): "Z", (1, 1): "Y"}
_MASKS = {v: k for k, v in _LETTER.items()}
_IPOW = (1, 1j, -1, -1j)


def letters_to_masks(letters: str) -> tuple[int, int]:
    x = z = 0
    for i, ch in enumerate(letters.upper()):
        bx, bz = _MASKS[ch]
        x |= bx << i
        z |= bz << i
    return x, z


def masks_to_letters(x: int, z: int, n: int) -> str:
    return "".join(_LETTER[((x >> i) & 1, (z >> i) & 1)] for i in range(n))


def pauli_product(x1: int, z1: int, x2: int, z2: int) -> tuple[complex, int, int]:
    x, z = x1 ^ x2, z1 ^ z2
    k = _popcount(x1 & z1) + _popcount(x2 & z2) + 2 * _popcount(z1 & x2) - _popcount(x & z)
    return _IPOW[k % 4], x, z


def pauli_matrix(x: int, z: int, n: int) -> sp.csr_matrix:
    """Sparse matrix of P(x, z) on n qubits (little-endian basis index)."""
    dim = 1 << n
    j = np.arange(dim)
    data = _IPOW[_popcount(x & z) % 4] * _parity_vec(j & z)
    return sp.csr_matrix((data.astype(complex), (j ^ x, j)), shape=(dim, dim))


def _parity_vec(a: np.ndarray) -> np.ndarray:
    """(-1)^popcount elementwise."""
    return 1 - 2 * (np.bitwise_count(a).astype(np.int64) & 1)


PauliSum = dict  # {(x, z): coef}


def _psum_mul(a: PauliSum, b: PauliSum) -> PauliSum:
    out: dict = defaultdict(complex)
    for (x1, z1), c1 in a.items():
        for (x2, z2), c2 in b.items():
            ph, x, z = pauli_product(x1, z1, x2, z2)
            out[(x, z)] += ph * c1 * c2
    return out


def _jw_ladder(p: int, kind: int) -> PauliSum:
    zs = (1 << p) - 1
    xp = 1 << p
    sign = -1j if kind == CREATE else 1j
    return {(xp, zs): 0.5, (xp, zs | xp): 0.5 * sign}


def _jw_string(factors: Iterable[tuple[int, int]]) -> PauliSum:
    acc: PauliSum = {(0, 0): 1.0}
    for orbital, kind in factors:
        acc = _psum_mul(acc, _jw_ladder(orbital, kind))
    return acc


@dataclass(frozen=True)
class PauliTerm:
    coefficient: complex
    letters: str

    @property
    def masks(self) -> tuple[int, int]:
        return letters_to_masks(self.letters)


def _clean(ps: PauliSum) -> PauliSum:
    return {k: c for k, c in ps.items() if abs(c) > DROP_TOL}


def jordan_wigner(op: FermionOperator, n: int) -> list[PauliTerm]:
    """Map a single-spin fermion operator to Pauli terms on an n-qubit register."""
    spins = op.spins()
    if len(spins) > 1:
        raise ValueError("jordan_wigner expects factors of a single spin label")
    total: dict = defaultdict(complex)
    for factors, coef in op.terms.items():
        if any(o >= n for (o, _, _) in factors):
            raise ValueError(f"orbital index outside register of size {n}")
        for key, c in _jw_string((o, k) for (o, _, k) in factors).items():
            total[key] += coef * c
    return [PauliTerm(c, masks_to_letters(x, z, n)) for (x, z), c in sorted(_clean(total).items())]


@dataclass
class BipartiteOperator:
    """sum_mu c_mu A_mu (x) B_mu with A on the alpha register and B on the beta register."""

    n_qubits: int
    terms: dict  # {(xa, za, xb, zb): coef}

    def as_list(self) -> list[tuple[complex, str, str]]:
        n = self.n_qubits
        return [
            (c, masks_to_letters(xa, za, n), masks_to_letters(xb, zb, n))
            for (xa, za, xb, zb), c in sorted(self.terms.items())
        ]

    def register_strings(self) -> list[tuple[int, int]]:
        """Distinct Pauli strings appearing on either register."""
        keys = {(xa, za) for (xa, za, _, _) in self.terms} | {(xb, zb) for (_, _, xb, zb) in self.terms}
        return sorted(keys)

    def to_dense(self) -> np.ndarray:
        """2N-qubit matrix, alpha register on the low qubits."""
        n = self.n_qubits
        out = np.zeros((1 << 2 * n, 1 << 2 * n), dtype=complex)
        for (xa, za, xb, zb), c in self.terms.items():
            out += c * sp.kron(pauli_matrix(xb, zb, n), pauli_matrix(xa, za, n)).toarray()
        return out

    def is_hermitian(self, atol: float = 1e-10) -> bool:
        return all(abs(c.imag) <= atol for c in self.terms.values())

    def __len__(self):
        return len(self.terms)


def split_spin_sectors(factors: tuple) -> tuple[int, tuple, tuple]:
    """Reorder a product so all alpha factors precede all beta factors.

    Returns (sign, alpha factors, beta factors); each factor is (orbital, kind).
    """
    inversions = 0
    betas_seen = 0
    for (_, s, _) in factors:
        if s == BETA:
            betas_seen += 1
        else:
            inversions += betas_seen
    alpha = tuple((o, k) for (o, s, k) in factors if s == ALPHA)
    beta = tuple((o, k) for (o, s, k) in factors if s == BETA)
    return (-1 if inversions % 2 else 1), alpha, beta


def bipartition(op: FermionOperator, n: int) -> BipartiteOperator:
    """Split each term as A (x) B on two n-qubit registers.

    Under the alpha-first ordering a beta ladder operator carries the full alpha
    parity string; with m beta factors that contributes ``P_alpha^m`` to A.
    """
    parity = (0, (1 << n) - 1)
    total: dict = defaultdict(complex)
    cache_a: dict = {}
    cache_b: dict = {}
    for factors, coef in op.terms.items():
        sign, fa, fb = split_spin_sectors(factors)
        odd = len(fb) % 2
        key_a = (fa, odd)
        if key_a not in cache_a:
            pa = _jw_string(fa)
            if odd:
                pa = _psum_mul(pa, {parity: 1.0})
            cache_a[key_a] = _clean(pa)
        if fb not in cache_b:
            cache_b[fb] = _clean(_jw_string(fb))
        for (xa, za), ca in cache_a[key_a].items():
            for (xb, zb), cb in cache_b[fb].items():
                total[(xa, za, xb, zb)] += sign * coef * ca * cb
    return BipartiteOperator(n, _clean(total))


# ---------------------------------------------------------------------------
# Register-level (matrix) representations


def ladder_string_matrix(factors: tuple, n: int) -> sp.csr_matrix:
    """Sparse matrix of a product of single-register ladder operators.

    ``factors`` is a sequence of (orbital, kind) applied right-to-left as written
    (the rightmost factor acts first).  Result is monomial: at most one nonzero
    per column.
    """
    dim = 1 << n
    states = np.arange(dim)
    amp = np.ones(dim)
    alive = np.ones(dim, dtype=bool)
    for orbital, kind in reversed(factors):
        bit = 1 << orbital
        occ = (states & bit) != 0
        if kind == CREATE:
            alive &= ~occ
        else:
            alive &= occ
        below = states & (bit - 1)
        amp = amp * _parity_vec(below)
        states = states ^ bit
    cols = np.nonzero(alive)[0]
    return sp.csr_matrix((amp[cols], (states[cols], cols)), shape=(dim, dim))


def parity_matrix(n: int) -> sp.csr_matrix:
    dim = 1 << n
    return sp.diags(_parity_vec(np.arange(dim)).astype(float)).tocsr()


def register_decomposition(op: FermionOperator, n: int) -> list[tuple[sp.csr_matrix, sp.csr_matrix]]:
    """Express op as a short list of (A, B) register matrices with op = sum A (x) B.

    Terms acting only on one register are summed into a single matrix; the rest
    are grouped by their alpha factor so mixed two-body terms collapse to N^2 pairs.
    """
    eye = sp.identity(1 << n, format="csr", dtype=complex)
    par = parity_matrix(n)
    alpha_only: dict = defaultdict(complex)
    beta_only: dict = defaultdict(complex)
    mixed: dict = defaultdict(lambda: defaultdict(complex))
    for factors, coef in op.terms.items():
        sign, fa, fb = split_spin_sectors(factors)
        if not fb:
            alpha_only[fa] += sign * coef
        elif not fa and len(fb) % 2 == 0:
            beta_only[fb] += sign * coef
        else:
            mixed[(fa, len(fb) % 2)][fb] += sign * coef

    cache: dict = {}

    def mat(fs):
        if fs not in cache:
            cache[fs] = ladder_string_matrix(fs, n).astype(complex)
        return cache[fs]

    out = []
    if alpha_only:
        a = sum((c * mat(f) for f, c in alpha_only.items()), sp.csr_matrix((1 << n, 1 << n), dtype=complex))
        out.append((a.tocsr(), eye))
    if beta_only:
        b = sum((c * mat(f) for f, c in beta_only.items()), sp.csr_matrix((1 << n, 1 << n), dtype=complex))
        out.append((eye, b.tocsr()))
    for (fa, odd), group in mixed.items():
        a = mat(fa) @ par if odd else mat(fa)
        b = sum((c * mat(f) for f, c in group.items()), sp.csr_matrix((1 << n, 1 << n), dtype=complex))
        out.append((a.tocsr(), b.tocsr()))
    return out


def fock_matrix(op: FermionOperator, n_orbitals: int) -> np.ndarray:
    """Dense matrix of op on the 2N-mode Fock space by direct occupation-bit action.

    Independent of the Pauli machinery; bit ``spin*N + p`` holds mode (p, spin).
    """
    n_modes = 2 * n_orbitals
    dim = 1 << n_modes
    out = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for factors, coef in op.terms.items():
        states = cols.copy()
        amp = np.full(dim, coef, dtype=complex)
        alive = np.ones(dim, dtype=bool)
        for orbital, spin, kind in reversed(factors):
            mode = spin * n_orbitals + orbital
            bit = 1 << mode
            occ = (states & bit) != 0
            alive &= ~occ if kind == CREATE else occ
            amp *= _parity_vec(states & (bit - 1))
            states = states ^ bit
        np.add.at(out, (states[alive], cols[alive]), amp[alive])
    return out


def sector_indices(n_orbitals: int, n_alpha: int, n_beta: int) -> np.ndarray:
    """Fock-space basis indices with the given alpha and beta electron counts."""
    idx = np.arange(1 << 2 * n_orbitals)
    lo = idx & ((1 << n_orbitals) - 1)
    hi = idx >> n_orbitals
    return idx[(np.bitwise_count(lo) == n_alpha) & (np.bitwise_count(hi) == n_beta)]


def pauli_decomposition(matrix: np.ndarray, tol: float = DROP_TOL) -> list[PauliTerm]:
    """Expand a 2^n x 2^n matrix as sum_P c_P P with c_P = Tr(P matrix) / 2^n."""
    matrix = np.asarray(matrix, dtype=complex)
    dim = matrix.shape[0]
    n = dim.bit_length() - 1
    if matrix.shape != (dim, dim) or 1 << n != dim:
        raise ValueError("matrix must be square with a power-of-two dimension")
    out = []
    for x in range(dim):
        for z in range(dim):
            c = (pauli_matrix(x, z, n).multiply(matrix.T)).sum() / dim
            if abs(c) > tol:
                out.append(PauliTerm(complex(c), masks_to_letters(x, z, n)))
    return out

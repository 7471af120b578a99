"""Entanglement-forged ansatz: circuits, forged expectation values, optimization.

The 2N-qubit state is ``sum_k lambda_k U|x_k> (x) U|x_k>`` with the same
N-qubit hop-gate circuit ``U`` on the alpha and beta registers.  Expectation
values of a bipartite operator ``sum_t c_t A_t (x) B_t`` reduce to N-qubit
matrix elements ``<x_k|U^dag P U|x_l>`` of register Pauli strings ``P``.
Diagonal elements come from circuits preparing ``U|x_k>``; off-diagonal ones
from the four superposition circuits ``U(|x_k> + i^p |x_l>)/sqrt(2)``.
"""

from __future__ import annotations

import json
import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .operators import BipartiteOperator, irrep_product
from .statevector import (
    BasisRotation,
    Circuit,
    Hop,
    PauliX,
    QubitState,
    Vprep,
    decompose,
    measurement_probabilities,
    run_circuit,
    sample_counts,
    task_rng,
)

DIRECT_QUBIT_CAP = 14
RECONSTRUCTION_SCALE = 0.5
DEFAULT_SHOTS = 100_000


class UnsupportedSuperpositionError(ValueError):
    """The two bitstrings do not differ in exactly two positions."""


# ---------------------------------------------------------------------------
# Ansatz


@dataclass(frozen=True)
class ForgedAnsatz:
    """Bitstrings are written orbital 0 first, e.g. ``"111000"``."""

    n_qubits: int
    bitstrings: tuple[str, ...]
    hop_layout: tuple[tuple[int, int], ...]
    thetas: tuple[float, ...]
    schmidt: tuple[float, ...]
    parameter_map: tuple[int, ...] = ()

    def __post_init__(self):
        n = self.n_qubits
        bits = tuple(self.bitstrings)
        if not bits:
            raise ValueError("need at least one bitstring")
        if any(len(b) != n or set(b) - {"0", "1"} for b in bits):
            raise ValueError(f"bitstrings must be length-{n} strings of 0/1")
        if len({b.count("1") for b in bits}) != 1:
            raise ValueError("all bitstrings must have the same Hamming weight")
        if len(set(bits)) != len(bits):
            raise ValueError("bitstrings must be distinct")
        layout = tuple((int(a), int(b)) for a, b in self.hop_layout)
        for a, b in layout:
            if not (0 <= a < n and 0 <= b < n) or a == b:
                raise ValueError(f"invalid hop pair ({a}, {b})")
        pmap = tuple(int(i) for i in self.parameter_map) or tuple(range(len(layout)))
        if len(pmap) != len(layout):
            raise ValueError("parameter_map needs one entry per hop position")
        thetas = tuple(float(t) for t in self.thetas)
        if pmap and (min(pmap) < 0 or max(pmap) >= len(thetas)):
            raise ValueError("parameter_map refers to a missing theta")
        if len(set(pmap)) != len(thetas):
            raise ValueError("every theta must drive at least one hop position")
        lam = tuple(float(x) for x in self.schmidt)
        if len(lam) != len(bits):
            raise ValueError("need one Schmidt coefficient per bitstring")
        if abs(sum(x * x for x in lam) - 1.0) > 1e-12:
            raise ValueError("Schmidt coefficients must be normalized")
        object.__setattr__(self, "bitstrings", bits)
        object.__setattr__(self, "hop_layout", layout)
        object.__setattr__(self, "parameter_map", pmap)
        object.__setattr__(self, "thetas", thetas)
        object.__setattr__(self, "schmidt", lam)

    @property
    def n_bitstrings(self) -> int:
        return len(self.bitstrings)

    @property
    def n_electrons(self) -> int:
        return 2 * self.bitstrings[0].count("1")

    def hop_angles(self) -> list[float]:
        return [self.thetas[i] for i in self.parameter_map]

    def bit_index(self, k: int) -> int:
        return sum(1 << i for i, b in enumerate(self.bitstrings[k]) if b == "1")

    def with_parameters(self, thetas: Sequence[float], schmidt: Sequence[float]) -> "ForgedAnsatz":
        return ForgedAnsatz(
            self.n_qubits, self.bitstrings, self.hop_layout, tuple(thetas), tuple(schmidt), self.parameter_map
        )

    def to_dict(self) -> dict:
        return {
            "format": "forged-ansatz",
            "version": 1,
            "n_qubits": self.n_qubits,
            "bitstrings": list(self.bitstrings),
            "hop_layout": [list(p) for p in self.hop_layout],
            "parameter_map": list(self.parameter_map),
            "thetas": list(self.thetas),
            "schmidt": list(self.schmidt),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForgedAnsatz":
        if d.get("format") != "forged-ansatz":
            raise ValueError("not a forged-ansatz record")
        if d.get("version") != 1:
            raise ValueError(f"unsupported forged-ansatz record version {d.get('version')!r}")
        return cls(
            int(d["n_qubits"]),
            tuple(d["bitstrings"]),
            tuple(tuple(p) for p in d["hop_layout"]),
            tuple(d["thetas"]),
            tuple(d["schmidt"]),
            tuple(d.get("parameter_map", ())),
        )


def save_ansatz(ansatz: ForgedAnsatz, path) -> None:
    with open(path, "w") as fh:
        json.dump(ansatz.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_ansatz(path) -> ForgedAnsatz:
    with open(path) as fh:
        return ForgedAnsatz.from_dict(json.load(fh))


def default_bitstrings(n_orbitals: int, n_electrons: int, orbital_irreps: Sequence[str] = ()) -> tuple[str, str]:
    """Closed-shell reference and its single swap across the Fermi level.

    The swap moves an electron from the highest occupied orbital to the lowest
    virtual orbital of the same irrep, preferring the pair closest to the
    HOMO/LUMO gap (ties go to the higher occupied orbital).
    """
    n_occ = n_electrons // 2
    if n_electrons % 2 or not 0 < n_occ < n_orbitals:
        raise ValueError("need an even electron count with both occupied and virtual orbitals")
    irreps = tuple(orbital_irreps) or ("A1",) * n_orbitals
    homo, lumo = n_occ - 1, n_occ
    best = None
    for i in range(n_occ):
        for a in range(n_occ, n_orbitals):
            if irrep_product(irreps[i], irreps[a]) != "A1":
                continue
            key = ((homo - i) + (a - lumo), -i)
            if best is None or key < best[0]:
                best = (key, i, a)
    i, a = (homo, lumo) if best is None else best[1:]
    ref = ["1"] * n_occ + ["0"] * (n_orbitals - n_occ)
    swap = list(ref)
    swap[i], swap[a] = "0", "1"
    return "".join(ref), "".join(swap)


# layouts meeting the target gate budgets; keyed by (electrons, orbitals)
DEFAULT_LAYOUTS: dict[tuple[int, int], tuple[tuple[tuple[int, int], ...], tuple[int, ...]]] = {
    (6, 5): (((2, 3), (1, 2), (0, 1), (3, 4)), ()),
    (8, 6): (((0, 1), (3, 4), (2, 3), (4, 5), (1, 2)), ()),
    (6, 6): (((0, 1), (2, 3), (1, 2), (3, 4), (0, 1), (4, 5)), ()),
    (8, 7): (((0, 1), (3, 4), (1, 2), (2, 3), (4, 5), (5, 6), (0, 1)), ()),
    # ten hop positions, nine angles: the two (5, 6) hops share one
    (10, 8): (
        ((0, 1), (2, 3), (4, 5), (1, 2), (5, 6), (6, 7), (3, 4), (5, 6), (0, 1), (1, 2)),
        (0, 1, 2, 3, 4, 5, 6, 4, 7, 8),
    ),
}


def brick_layout(n_orbitals: int) -> tuple[tuple[int, int], ...]:
    even = [(q, q + 1) for q in range(0, n_orbitals - 1, 2)]
    odd = [(q, q + 1) for q in range(1, n_orbitals - 1, 2)]
    return tuple(even + odd)


def default_layout(n_electrons: int, n_orbitals: int) -> tuple[tuple[tuple[int, int], ...], tuple[int, ...]]:
    """(hop pairs, parameter map) for an active space; a brick chain otherwise."""
    return DEFAULT_LAYOUTS.get((n_electrons, n_orbitals), (brick_layout(n_orbitals), ()))


def symmetric_layout(n_orbitals: int, n_electrons: int, orbital_irreps: Sequence[str]) -> tuple[tuple[int, int], ...]:
    """Disjoint same-irrep (occupied, virtual) pairs, nested around the Fermi level.

    Each register factor then stays inside one irrep, so the forged state has
    sharp symmetry.  It is also a pure singlet whenever the qubits strictly
    between the two members of every pair carry a fixed electron count, which
    the nesting gives when irreps pair up symmetrically.
    """
    n_occ = n_electrons // 2
    irreps = tuple(orbital_irreps) or ("A1",) * n_orbitals
    free = list(range(n_occ, n_orbitals))
    pairs = []
    for i in range(n_occ - 1, -1, -1):
        for a in free:
            if irreps[a] == irreps[i]:
                pairs.append((i, a))
                free.remove(a)
                break
    return tuple(pairs)


def make_ansatz(
    n_orbitals: int,
    n_electrons: int,
    orbital_irreps: Sequence[str] = (),
    layout: str | Sequence[tuple[int, int]] = "default",
    parameter_map: Sequence[int] = (),
    bitstrings: Sequence[str] | None = None,
) -> ForgedAnsatz:
    """Ansatz template at theta = 0 with all weight on the reference bitstring."""
    bits = tuple(bitstrings) if bitstrings else default_bitstrings(n_orbitals, n_electrons, orbital_irreps)
    if layout == "default":
        pairs, pmap = default_layout(n_electrons, n_orbitals)
        if not parameter_map:
            parameter_map = pmap
    elif layout == "symmetric":
        pairs = symmetric_layout(n_orbitals, n_electrons, orbital_irreps)
    elif layout == "brick":
        pairs = brick_layout(n_orbitals)
    elif isinstance(layout, str):
        raise ValueError(f"unknown layout {layout!r}")
    else:
        pairs = tuple(tuple(p) for p in layout)
    n_params = len(set(parameter_map)) if parameter_map else len(pairs)
    schmidt = (1.0,) + (0.0,) * (len(bits) - 1)
    return ForgedAnsatz(n_orbitals, bits, tuple(pairs), (0.0,) * n_params, schmidt, tuple(parameter_map))


# ---------------------------------------------------------------------------
# Circuits


def differing_pair(ansatz: ForgedAnsatz, k: int, l: int) -> tuple[int, int]:
    """(qubit occupied only in x_k, qubit occupied only in x_l)."""
    xk, xl = ansatz.bitstrings[k], ansatz.bitstrings[l]
    diff = [i for i in range(ansatz.n_qubits) if xk[i] != xl[i]]
    if len(diff) != 2:
        raise UnsupportedSuperpositionError(
            f"superposition circuits need bitstrings differing in two positions, got {len(diff)}"
        )
    q1 = diff[0] if xk[diff[0]] == "1" else diff[1]
    q2 = diff[1] if q1 == diff[0] else diff[0]
    return q1, q2


def build_forged_circuit(
    ansatz: ForgedAnsatz, mode: str = "diagonal", k: int = 0, l: int | None = None, p: int = 0
) -> Circuit:
    """Register circuit without measurement.

    ``diagonal`` prepares ``U|x_k>``; ``superposition`` prepares
    ``U(|x_k> + i^p |x_l>)/sqrt(2)`` up to a global phase.
    """
    circ = Circuit(ansatz.n_qubits)
    xk = ansatz.bitstrings[k]
    if mode == "diagonal":
        circ.extend(PauliX(q) for q in range(ansatz.n_qubits) if xk[q] == "1")
    elif mode == "superposition":
        if l is None or l == k:
            raise ValueError("superposition mode needs two different bitstrings")
        q1, q2 = differing_pair(ansatz, k, l)
        xl = ansatz.bitstrings[l]
        circ.extend(PauliX(q) for q in range(ansatz.n_qubits) if xk[q] == "1" and xl[q] == "1")
        circ.append(Vprep(q1, q2, f"phi_{p}"))
    else:
        raise ValueError(f"unknown circuit mode {mode!r}")
    circ.extend(Hop(t, a, b) for (a, b), t in zip(ansatz.hop_layout, ansatz.hop_angles()))
    return circ


def circuit_keys(ansatz: ForgedAnsatz) -> list[tuple]:
    keys: list[tuple] = [("diag", k) for k in range(ansatz.n_bitstrings)]
    for k in range(ansatz.n_bitstrings):
        for l in range(k + 1, ansatz.n_bitstrings):
            keys.extend(("sup", k, l, p) for p in range(4))
    return keys


def circuit_for_key(ansatz: ForgedAnsatz, key: tuple) -> Circuit:
    if key[0] == "diag":
        return build_forged_circuit(ansatz, "diagonal", key[1])
    return build_forged_circuit(ansatz, "superposition", key[1], key[2], key[3])


def register_states(ansatz: ForgedAnsatz) -> list[np.ndarray]:
    """U|x_k> for every bitstring."""
    return [run_circuit(build_forged_circuit(ansatz, "diagonal", k)).amplitudes for k in range(ansatz.n_bitstrings)]


def direct_statevector(ansatz: ForgedAnsatz, max_qubits: int = DIRECT_QUBIT_CAP) -> QubitState:
    """The full 2N-qubit forged state, alpha register in the low bits."""
    if ansatz.n_qubits > max_qubits:
        raise ValueError(f"direct statevector capped at N={max_qubits} spatial orbitals")
    lam = np.asarray(ansatz.schmidt)
    if abs(lam @ lam - 1.0) > 1e-12:
        raise ValueError("Schmidt coefficients must be normalized")
    psi = sum(c * np.kron(u, u) for c, u in zip(lam, register_states(ansatz)))
    return QubitState(2 * ansatz.n_qubits, psi)


# ---------------------------------------------------------------------------
# Measurement settings and estimates


def _support(x: int, z: int) -> int:
    return x | z


def _letter(x: int, z: int, q: int) -> str:
    return "IXZY"[((x >> q) & 1) | (((z >> q) & 1) << 1)]


def group_qubitwise(strings: Sequence[tuple[int, int]], n_qubits: int) -> list[tuple[str, list[int]]]:
    """Greedy qubit-wise-commuting grouping.

    Returns ``(bases, member indices)`` per setting; unconstrained qubits are
    measured in Z.  Heaviest strings are placed first, so a complete Pauli set
    yields exactly the 3^N full-weight settings.
    """
    order = sorted(
        (i for i, s in enumerate(strings) if s != (0, 0)),
        key=lambda i: (-bin(_support(*strings[i])).count("1"), strings[i]),
    )
    settings: list[tuple[list[str], list[int]]] = []
    for i in order:
        x, z = strings[i]
        letters = [_letter(x, z, q) for q in range(n_qubits)]
        for bases, members in settings:
            if all(a == "I" or b == "I" or a == b for a, b in zip(letters, bases)):
                for q, a in enumerate(letters):
                    if a != "I":
                        bases[q] = a
                members.append(i)
                break
        else:
            settings.append((letters, [i]))
    return [("".join("Z" if b == "I" else b for b in bases), members) for bases, members in settings]


class ShotEstimator:
    """Finite-shot parity estimates with their multinomial covariance."""

    def __init__(self, shots: int = DEFAULT_SHOTS):
        if shots < 1:
            raise ValueError("shots must be at least 1")
        self.shots = int(shots)

    def counts(self, state: QubitState, bases: str, rng: np.random.Generator) -> np.ndarray:
        return sample_counts(state, bases, self.shots, rng)

    def estimate(self, state, bases, masks, weight, rng):
        hist = self.counts(state, bases, rng)
        return parity_estimates(hist, masks)


def parity_estimates(hist: np.ndarray, masks: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    """Parity means over a histogram and the multinomial covariance of those means."""
    hist = np.asarray(hist)
    shots = hist.sum()
    freq = hist / shots
    masks = np.asarray(masks, dtype=np.int64)
    values = kernels.parity_expectations(freq, masks)
    seen = np.nonzero(hist)[0]
    signs = 1 - 2 * (np.bitwise_count(seen[:, None] & masks[None, :]).astype(np.int64) & 1)
    centered = signs - values
    cov = (centered.T * freq[seen]) @ centered / shots
    return values, cov


@dataclass
class PauliEstimates:
    """Register Pauli-string expectations on every forging circuit.

    ``values[c, s]`` is the estimate for circuit ``keys[c]`` and string
    ``strings[s]``; ``blocks`` holds ``(c, string indices, covariance)`` per
    measurement setting (empty in exact mode).
    """

    keys: list
    strings: list
    values: np.ndarray
    blocks: list = field(default_factory=list)
    settings: int = 0

    def variance(self, grad: np.ndarray) -> float:
        total = 0.0
        for c, idx, cov in self.blocks:
            g = grad[c, idx]
            total += float(g @ cov @ g)
        return max(total, 0.0)

    def replicate(self, rng: np.random.Generator) -> "PauliEstimates":
        """A Gaussian draw of all estimates around their values (block covariance)."""
        vals = self.values.copy()
        for c, idx, cov in self.blocks:
            vals[c, idx] += rng.multivariate_normal(np.zeros(len(idx)), cov, method="eigh")
        return PauliEstimates(self.keys, self.strings, vals, self.blocks, self.settings)


def _run_tasks(fn: Callable, tasks: list, threads: int) -> list:
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, tasks))
    return [fn(t) for t in tasks]


def estimate_paulis(
    ansatz: ForgedAnsatz,
    strings: Sequence[tuple[int, int]],
    mode: str = "exact",
    seed: int | None = None,
    estimator=None,
    shots: int = DEFAULT_SHOTS,
    threads: int = 1,
    settings: list | None = None,
) -> PauliEstimates:
    """Expectations of register strings on the diagonal and superposition circuits."""
    strings = [(int(x), int(z)) for x, z in strings]
    keys = circuit_keys(ansatz)
    states = [run_circuit(circuit_for_key(ansatz, key)) for key in keys]
    xs = np.array([s[0] for s in strings], dtype=np.int64)
    zs = np.array([s[1] for s in strings], dtype=np.int64)
    if mode == "exact":
        vals = np.array([kernels.pauli_expectations(st.amplitudes, st.amplitudes, xs, zs).real for st in states])
        return PauliEstimates(keys, strings, vals.reshape(len(keys), len(strings)))
    if mode not in ("sampled", "noisy"):
        raise ValueError(f"unknown evaluation mode {mode!r}")
    if estimator is None:
        estimator = ShotEstimator(shots)
    if settings is None:
        settings = group_qubitwise(strings, ansatz.n_qubits)
    weight = ansatz.bitstrings[0].count("1")
    vals = np.zeros((len(keys), len(strings)))
    identity = [i for i, s in enumerate(strings) if s == (0, 0)]
    vals[:, identity] = 1.0

    def task(t):
        c, si = t
        bases, members = settings[si]
        masks = [_support(*strings[i]) for i in members]
        v, cov = estimator.estimate(states[c], bases, masks, weight, task_rng(seed, c, si))
        return c, members, v, cov

    tasks = [(c, si) for c in range(len(keys)) for si in range(len(settings))]
    blocks = []
    for c, members, v, cov in _run_tasks(task, tasks, threads):
        vals[c, members] = v
        blocks.append((c, np.array(members, dtype=np.int64), cov))
    return PauliEstimates(keys, strings, vals, blocks, settings=len(settings))


# ---------------------------------------------------------------------------
# Matrix elements


def reconstruction_coefficients(scale: float = RECONSTRUCTION_SCALE) -> np.ndarray:
    """c_p with <x_k|A|x_l> = sum_p c_p <phi^p|A|phi^p>."""
    return scale * (-1j) ** np.arange(4)


@dataclass
class MatrixElementTable:
    """``values[s, k, l] = <x_k|U^dag P_s U|x_l>`` for every register string."""

    strings: list
    values: np.ndarray
    sigma: np.ndarray | None = None


def matrix_elements(estimates: PauliEstimates, n_bitstrings: int, scale: float = RECONSTRUCTION_SCALE) -> MatrixElementTable:
    cp = reconstruction_coefficients(scale)
    ns = len(estimates.strings)
    vals = np.zeros((ns, n_bitstrings, n_bitstrings), dtype=complex)
    var = np.zeros((ns, n_bitstrings, n_bitstrings))
    index = {key: c for c, key in enumerate(estimates.keys)}
    block_var = np.zeros_like(estimates.values)
    for c, idx, cov in estimates.blocks:
        block_var[c, idx] = np.diag(cov)
    for k in range(n_bitstrings):
        c = index[("diag", k)]
        vals[:, k, k] = estimates.values[c]
        var[:, k, k] = block_var[c]
        for l in range(k + 1, n_bitstrings):
            cs = [index[("sup", k, l, p)] for p in range(4)]
            vals[:, k, l] = cp @ estimates.values[cs]
            vals[:, l, k] = vals[:, k, l].conj()
            var[:, k, l] = var[:, l, k] = (np.abs(cp) ** 2) @ block_var[cs]
    return MatrixElementTable(estimates.strings, vals, np.sqrt(var) if estimates.blocks else None)


def off_diagonal_element(
    ansatz: ForgedAnsatz,
    k: int,
    l: int,
    op_terms: Sequence[tuple[int, int]],
    mode: str = "exact",
    scale: float = RECONSTRUCTION_SCALE,
    seed: int | None = None,
    shots: int = DEFAULT_SHOTS,
) -> np.ndarray:
    """<x_k|U^dag P U|x_l> for each string ``(x, z)`` from the phi^p circuits."""
    if k == l:
        raise ValueError("off_diagonal_element needs k != l")
    strings = [(int(x), int(z)) for x, z in op_terms]
    cp = reconstruction_coefficients(scale)
    per_p = []
    for p in range(4):
        state = run_circuit(build_forged_circuit(ansatz, "superposition", k, l, p))
        if mode == "exact":
            xs = np.array([s[0] for s in strings], dtype=np.int64)
            zs = np.array([s[1] for s in strings], dtype=np.int64)
            per_p.append(kernels.pauli_expectations(state.amplitudes, state.amplitudes, xs, zs).real)
        else:
            est = np.zeros(len(strings))
            for si, (bases, members) in enumerate(group_qubitwise(strings, ansatz.n_qubits)):
                hist = sample_counts(state, bases, shots, task_rng(seed, p, si))
                est[members] = parity_estimates(hist, [_support(*strings[i]) for i in members])[0]
            for i, s in enumerate(strings):
                if s == (0, 0):
                    est[i] = 1.0
            per_p.append(est)
    return cp @ np.array(per_p)


# ---------------------------------------------------------------------------
# Forged expectation


@dataclass(frozen=True)
class ForgedEnergy:
    value: float
    sigma: float = 0.0


def _term_arrays(op: BipartiteOperator, strings: list, hermitian: bool = True):
    index = {s: i for i, s in enumerate(strings)}
    ia, ib, coef = [], [], []
    for (xa, za, xb, zb), c in sorted(op.terms.items()):
        ia.append(index[(xa, za)])
        ib.append(index[(xb, zb)])
        coef.append(c)
    coef = np.array(coef, dtype=complex)
    if hermitian:
        if np.abs(coef.imag).max(initial=0.0) > 1e-10:
            raise ValueError("forged expectation needs a Hermitian bipartite operator")
        coef = coef.real
    return np.array(ia, dtype=np.int64), np.array(ib, dtype=np.int64), coef


def bipartite_value(op: BipartiteOperator, table: MatrixElementTable, schmidt: Sequence[float]) -> float:
    ia, ib, coef = _term_arrays(op, table.strings)
    lam = np.asarray(schmidt)
    w = np.outer(lam, lam)
    val = np.einsum("t,kl,tkl,tkl->", coef, w, table.values[ia], table.values[ib])
    return float(val.real)


def forged_matrix_element(ansatz: ForgedAnsatz, op: BipartiteOperator, route: str = "protocol") -> complex:
    """Exact <Psi|op|Psi> for a possibly non-Hermitian bipartite operator."""
    strings = op.register_strings()
    if route == "braket":
        table = braket_table(ansatz, strings)
    else:
        table = matrix_elements(estimate_paulis(ansatz, strings, "exact"), ansatz.n_bitstrings)
    ia, ib, coef = _term_arrays(op, table.strings, hermitian=False)
    lam = np.asarray(ansatz.schmidt)
    return complex(np.einsum("t,kl,tkl,tkl->", coef, np.outer(lam, lam), table.values[ia], table.values[ib]))


def _energy_gradient(op, table, schmidt, estimates, scale) -> np.ndarray:
    """dE/d(estimate) for every (circuit, string) pair."""
    ia, ib, coef = _term_arrays(op, table.strings)
    lam = np.asarray(schmidt)
    w = np.outer(lam, lam)
    g = np.zeros(table.values.shape, dtype=complex)
    np.add.at(g, ia, coef[:, None, None] * w * table.values[ib])
    np.add.at(g, ib, coef[:, None, None] * w * table.values[ia])
    cp = reconstruction_coefficients(scale)
    grad = np.zeros_like(estimates.values)
    for c, key in enumerate(estimates.keys):
        if key[0] == "diag":
            grad[c] = g[:, key[1], key[1]].real
        else:
            _, k, l, p = key
            grad[c] = (g[:, k, l] * cp[p] + g[:, l, k] * np.conj(cp[p])).real
    return grad


def forged_expectation(
    ansatz: ForgedAnsatz,
    op: BipartiteOperator,
    mode: str = "exact",
    seed: int | None = None,
    shots: int = DEFAULT_SHOTS,
    estimator=None,
    threads: int = 1,
    route: str = "protocol",
) -> ForgedEnergy:
    """sum_{k,l,t} lambda_k lambda_l c_t A_t,kl B_t,kl with first-order sigma.

    ``route="braket"`` (exact only) evaluates the register matrix elements as
    direct inner products instead of through the superposition circuits.
    """
    if op.n_qubits != ansatz.n_qubits:
        raise ValueError("operator and ansatz registers differ in size")
    strings = op.register_strings()
    if mode == "exact" and route == "braket":
        return ForgedEnergy(bipartite_value(op, braket_table(ansatz, strings), ansatz.schmidt))
    est = estimate_paulis(ansatz, strings, mode, seed=seed, estimator=estimator, shots=shots, threads=threads)
    table = matrix_elements(est, ansatz.n_bitstrings)
    value = bipartite_value(op, table, ansatz.schmidt)
    if mode == "exact":
        return ForgedEnergy(value)
    grad = _energy_gradient(op, table, ansatz.schmidt, est, RECONSTRUCTION_SCALE)
    return ForgedEnergy(value, math.sqrt(est.variance(grad)))


def braket_table(ansatz: ForgedAnsatz, strings: Sequence[tuple[int, int]]) -> MatrixElementTable:
    us = register_states(ansatz)
    xs = np.array([s[0] for s in strings], dtype=np.int64)
    zs = np.array([s[1] for s in strings], dtype=np.int64)
    kk = ansatz.n_bitstrings
    vals = np.zeros((len(strings), kk, kk), dtype=complex)
    for k in range(kk):
        for l in range(kk):
            vals[:, k, l] = kernels.pauli_expectations(us[k], us[l], xs, zs)
    return MatrixElementTable(list(strings), vals)


# ---------------------------------------------------------------------------
# Optimization


@dataclass(frozen=True)
class OptimizerConfig:
    max_iterations: int = 4000
    restarts: int = 3
    tolerance: float = 1e-8
    seed: int = 0
    init_scale: float = 0.3


@dataclass
class OptimizationResult:
    ansatz: ForgedAnsatz
    energy: float
    converged: bool
    history: list
    n_evaluations: int


def _schmidt_from_angle(n_bitstrings: int, phi: float) -> tuple[float, ...]:
    if n_bitstrings == 1:
        return (1.0,)
    if n_bitstrings != 2:
        raise ValueError("angle parametrization covers one or two bitstrings")
    return (math.cos(phi), math.sin(phi))


def optimize_ground_state(
    template: ForgedAnsatz,
    op: BipartiteOperator,
    config: OptimizerConfig = OptimizerConfig(),
    mode: str = "exact",
    seed: int | None = None,
    shots: int = DEFAULT_SHOTS,
) -> OptimizationResult:
    """Nelder-Mead over (thetas, Schmidt angle) with seeded restarts.

    The first start is the template itself; restarts add random offsets.
    Every evaluated energy is kept in ``history``.
    """
    n_theta = len(template.thetas)
    two = template.n_bitstrings == 2
    history: list[float] = []
    counter = [0]

    def unpack(v):
        phi = v[n_theta] if two else 0.0
        return template.with_parameters(v[:n_theta], _schmidt_from_angle(template.n_bitstrings, phi))

    def objective(v):
        ans = unpack(v)
        if mode == "exact":
            e = forged_expectation(ans, op, "exact", route="braket").value
        else:
            counter[0] += 1
            e = forged_expectation(ans, op, mode, seed=None if seed is None else seed + counter[0], shots=shots).value
        history.append(e)
        return e

    lam0 = template.schmidt
    phi0 = math.atan2(lam0[1], lam0[0]) if two else 0.0
    start = np.array(list(template.thetas) + ([phi0] if two else []), dtype=float)
    rng = np.random.default_rng(config.seed)
    best = None
    converged_any = False
    for r in range(max(1, config.restarts)):
        x0 = start if r == 0 else start + rng.uniform(-config.init_scale, config.init_scale, start.shape)
        if r > 0 and two:
            x0[n_theta] = rng.uniform(0.0, math.pi / 4)
        res = minimize(
            objective,
            x0,
            method="Nelder-Mead",
            options={
                "maxiter": config.max_iterations,
                "maxfev": 2 * config.max_iterations,
                "xatol": 1e-7,
                "fatol": config.tolerance,
                "adaptive": len(x0) > 4,
            },
        )
        converged_any |= bool(res.success)
        if best is None or res.fun < best.fun:
            best = res
    if not converged_any:
        warnings.warn("ground-state optimization did not converge; returning best point found")
    ans = unpack(best.x)
    energy = forged_expectation(ans, op, "exact", route="braket").value if mode == "exact" else float(best.fun)
    return OptimizationResult(ans, energy, converged_any, history, len(history))


# ---------------------------------------------------------------------------
# Resources


@dataclass(frozen=True)
class ResourceCount:
    qubits: int
    n_parameters: int
    single_qubit_gates: int
    two_qubit_gates: int
    depth: int


def resource_count(ansatz: ForgedAnsatz, k: int = 0, l: int = 1) -> ResourceCount:
    """Gate budget of one superposition circuit followed by per-qubit measurement.

    Every block is expanded into its primitive gates (Vprep 4+1, hop 4+3,
    measurement 2+0 single/two-qubit slots, X gates 1) and scheduled as soon as
    its qubits are free; depth counts the measurement layer.
    """
    circ = build_forged_circuit(ansatz, "superposition", k, l, 0)
    circ.extend(BasisRotation(q, "X") for q in range(ansatz.n_qubits))
    level = [0] * ansatz.n_qubits
    singles = twos = 0
    for gate in circ.gates:
        for name, qs, _ in decompose(gate):
            if len(qs) == 2:
                twos += 1
            elif name != "measure":
                singles += 1
            d = max(level[q] for q in qs) + 1
            for q in qs:
                level[q] = d
    n_params = len(ansatz.thetas) + (2 if ansatz.n_bitstrings == 2 else ansatz.n_bitstrings)
    return ResourceCount(ansatz.n_qubits, n_params, singles, twos, max(level))


def measurement_distribution(ansatz: ForgedAnsatz, key: tuple, bases: str) -> np.ndarray:
    """Exact outcome distribution of one forging circuit in one setting."""
    return measurement_probabilities(run_circuit(circuit_for_key(ansatz, key)), bases)

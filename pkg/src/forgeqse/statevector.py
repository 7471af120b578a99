"""Small statevector simulator for the forging gate set.

Basis index ``b`` stores qubit ``i`` in bit ``i`` (little-endian), so a qubit
bitstring and the orbital occupation bitstring of a determinant coincide.
Two-qubit gate matrices are written in the pair index ``b_q1 + 2*b_q2``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence, Union

import numpy as np

from . import kernels
from .operators import PauliTerm

NORM_TOL = 1e-10
IMAG_TOL = 1e-10

SQ2 = 1.0 / np.sqrt(2.0)

# single-qubit primitives
_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Z = np.diag([1, -1]).astype(complex)
_H = SQ2 * np.array([[1, 1], [1, -1]], dtype=complex)
_S = np.diag([1, 1j])
_SDG = np.diag([1, -1j])

PHI_PHASES = ((None, None), ("s", "z"), (None, "z"), ("s", None))  # R_p = I, ZS, Z, S


def _ry(t: float) -> np.ndarray:
    c, s = np.cos(t / 2), np.sin(t / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def _rz(t: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * t), np.exp(0.5j * t)])


def _cx(control_low: bool) -> np.ndarray:
    """CNOT in pair index b_q1 + 2*b_q2; control on q1 when control_low."""
    m = np.zeros((4, 4), dtype=complex)
    for b in range(4):
        b1, b2 = b & 1, b >> 1
        if control_low:
            b2 ^= b1
        else:
            b1 ^= b2
        m[b1 + 2 * b2, b] = 1
    return m


def hop_matrix(theta: float) -> np.ndarray:
    """Number-conserving hop gate in pair index b_q1 + 2*b_q2.

    Identity on |00>, rotation by theta on {|01>, |10>} (ket order q1 q2),
    and -1 on |11>.
    """
    c, s = np.cos(theta), np.sin(theta)
    m = np.zeros((4, 4), dtype=complex)
    m[0, 0] = 1.0
    # index 1 = |10> (q1 set), index 2 = |01> (q2 set)
    m[2, 2], m[1, 2] = c, s
    m[2, 1], m[1, 1] = -s, c
    m[3, 3] = -1.0
    return m


def vprep_matrix(variant: str) -> np.ndarray:
    """Action of a Vprep block on |00> of the pair, as a 4-vector."""
    if variant == "ten":
        return np.array([0, 1, 0, 0], dtype=complex)
    if variant == "zeroone":
        return np.array([0, 0, 1, 0], dtype=complex)
    p = _phi_index(variant)
    return SQ2 * np.array([0, 1, 1j**p, 0], dtype=complex)


def _phi_index(variant: str) -> int:
    if variant.startswith("phi_") and variant[4:] in ("0", "1", "2", "3"):
        return int(variant[4:])
    raise ValueError(f"unknown Vprep variant {variant!r}")


# ---------------------------------------------------------------------------
# Circuit description


@dataclass(frozen=True)
class PauliX:
    q: int


@dataclass(frozen=True)
class Vprep:
    q1: int
    q2: int
    variant: str = "phi_0"

    def __post_init__(self):
        if self.variant not in ("ten", "zeroone"):
            _phi_index(self.variant)


@dataclass(frozen=True)
class Hop:
    theta: float
    q1: int
    q2: int


@dataclass(frozen=True)
class BasisRotation:
    q: int
    axis: str = "Z"

    def __post_init__(self):
        if self.axis not in ("X", "Y", "Z"):
            raise ValueError(f"measurement axis must be X, Y or Z, got {self.axis!r}")


Gate = Union[PauliX, Vprep, Hop, BasisRotation]


def gate_qubits(gate: Gate) -> tuple[int, ...]:
    if isinstance(gate, (PauliX, BasisRotation)):
        return (gate.q,)
    return (gate.q1, gate.q2)


@dataclass
class Circuit:
    n_qubits: int
    gates: list = field(default_factory=list)

    def __post_init__(self):
        for g in self.gates:
            self._check(g)

    def _check(self, gate: Gate) -> None:
        qs = gate_qubits(gate)
        if any(not 0 <= q < self.n_qubits for q in qs):
            raise ValueError(f"{gate} acts outside a {self.n_qubits}-qubit register")
        if len(qs) == 2 and qs[0] == qs[1]:
            raise ValueError(f"{gate} needs two distinct qubits")

    def append(self, gate: Gate) -> "Circuit":
        self._check(gate)
        self.gates.append(gate)
        return self

    def extend(self, gates: Iterable[Gate]) -> "Circuit":
        for g in gates:
            self.append(g)
        return self


# ---------------------------------------------------------------------------
# Primitive decomposition, used for gate accounting and as a cross-check of
# the block matrices.  Each primitive is (name, qubits, parameter).


def decompose(gate: Gate) -> list[tuple[str, tuple[int, ...], float]]:
    if isinstance(gate, PauliX):
        return [("x", (gate.q,), 0.0)]
    if isinstance(gate, BasisRotation):
        first = {"X": "id", "Y": "sdg", "Z": "id"}[gate.axis]
        second = {"X": "h", "Y": "h", "Z": "id"}[gate.axis]
        return [(first, (gate.q,), 0.0), (second, (gate.q,), 0.0), ("measure", (gate.q,), 0.0)]
    if isinstance(gate, Vprep):
        a, b = gate.q1, gate.q2
        if gate.variant == "ten":
            return [("x", (a,), 0.0)]
        if gate.variant == "zeroone":
            return [("x", (b,), 0.0)]
        s_slot, z_slot = PHI_PHASES[_phi_index(gate.variant)]
        return [
            ("h", (a,), 0.0),
            ("cx", (a, b), 0.0),
            ("x", (a,), 0.0),
            (s_slot or "id", (a,), 0.0),
            (z_slot or "id", (a,), 0.0),
        ]
    if isinstance(gate, Hop):
        a, b, t = gate.q1, gate.q2, gate.theta
        # equal to hop_matrix(t) up to a global phase
        return [
            ("rz", (a,), np.pi),
            ("ry", (b,), 0.0),
            ("cx", (a, b), 0.0),
            ("ry", (a,), np.pi / 2 - t),
            ("cx", (b, a), 0.0),
            ("ry", (a,), t - np.pi / 2),
            ("cx", (a, b), 0.0),
        ]
    raise TypeError(f"not a gate: {gate!r}")


_FIXED = {"id": _I2, "x": _X, "z": _Z, "h": _H, "s": _S, "sdg": _SDG}


def primitive_matrix(name: str, param: float) -> np.ndarray:
    if name in _FIXED:
        return _FIXED[name]
    if name == "ry":
        return _ry(param)
    if name == "rz":
        return _rz(param)
    raise ValueError(f"no matrix for primitive {name!r}")


# ---------------------------------------------------------------------------
# State and gate application


@dataclass
class QubitState:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (1 << self.n_qubits,):
            raise ValueError("amplitude vector must have length 2**n_qubits")
        self.amplitudes = amps

    @classmethod
    def zero(cls, n_qubits: int) -> "QubitState":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[0] = 1.0
        return cls(n_qubits, amps)

    @classmethod
    def basis(cls, n_qubits: int, index: int) -> "QubitState":
        amps = np.zeros(1 << n_qubits, dtype=complex)
        amps[index] = 1.0
        return cls(n_qubits, amps)

    def copy(self) -> "QubitState":
        return QubitState(self.n_qubits, self.amplitudes.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def is_normalized(self) -> bool:
        return abs(self.norm() ** 2 - 1.0) < NORM_TOL


def _axis(q: int, n: int) -> int:
    # amplitudes reshaped to (2,)*n put the highest qubit first
    return n - 1 - q


def apply_1q(state: QubitState, u: np.ndarray, q: int) -> QubitState:
    n = state.n_qubits
    psi = state.amplitudes.reshape((2,) * n)
    psi = np.moveaxis(np.tensordot(u, psi, axes=([1], [_axis(q, n)])), 0, _axis(q, n))
    state.amplitudes = psi.reshape(-1)
    return state


def apply_2q(state: QubitState, u: np.ndarray, q1: int, q2: int) -> QubitState:
    """Apply a 4x4 matrix given in pair index b_q1 + 2*b_q2."""
    n = state.n_qubits
    psi = state.amplitudes.reshape((2,) * n)
    # tensor indices (b_q2, b_q1) match the pair index b_q1 + 2*b_q2
    u4 = u.reshape(2, 2, 2, 2)
    ax = [_axis(q2, n), _axis(q1, n)]
    psi = np.tensordot(u4, psi, axes=([2, 3], ax))
    psi = np.moveaxis(psi, [0, 1], ax)
    state.amplitudes = psi.reshape(-1)
    return state


def apply_hop_gate(state: QubitState, theta: float, q1: int, q2: int) -> QubitState:
    return apply_2q(state, hop_matrix(theta), q1, q2)


def apply_vprep(state: QubitState, q1: int, q2: int, variant: str) -> QubitState:
    """Run the Vprep block; maps the pair's |00> to the variant's target state."""
    for name, qs, param in decompose(Vprep(q1, q2, variant)):
        _apply_primitive(state, name, qs, param)
    return state


def apply_basis_rotation(state: QubitState, q: int, axis: str) -> QubitState:
    """Rotate so that a Z measurement on q reads out the requested axis."""
    if axis == "X":
        return apply_1q(state, _H, q)
    if axis == "Y":
        return apply_1q(state, _H @ _SDG, q)
    if axis == "Z":
        return state
    raise ValueError(f"measurement axis must be X, Y or Z, got {axis!r}")


def _apply_primitive(state, name, qs, param):
    if name == "measure":
        return state
    if name == "cx":
        return apply_2q(state, _cx(True), *qs)
    return apply_1q(state, primitive_matrix(name, param), qs[0])


def apply_gate(state: QubitState, gate: Gate) -> QubitState:
    if isinstance(gate, PauliX):
        return apply_1q(state, _X, gate.q)
    if isinstance(gate, Hop):
        return apply_hop_gate(state, gate.theta, gate.q1, gate.q2)
    if isinstance(gate, Vprep):
        return apply_vprep(state, gate.q1, gate.q2, gate.variant)
    if isinstance(gate, BasisRotation):
        return apply_basis_rotation(state, gate.q, gate.axis)
    raise TypeError(f"not a gate: {gate!r}")


def run_circuit(circuit: Circuit, initial: QubitState | None = None) -> QubitState:
    state = QubitState.zero(circuit.n_qubits) if initial is None else initial.copy()
    for g in circuit.gates:
        apply_gate(state, g)
    return state


def run_primitives(circuit: Circuit, initial: QubitState | None = None) -> QubitState:
    """Run the circuit through its primitive decomposition (global phases differ)."""
    state = QubitState.zero(circuit.n_qubits) if initial is None else initial.copy()
    for g in circuit.gates:
        for name, qs, param in decompose(g):
            _apply_primitive(state, name, qs, param)
    return state


# ---------------------------------------------------------------------------
# Measurement


def _terms_to_masks(pauli_sum) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    coefs, xs, zs = [], [], []
    for t in pauli_sum:
        if isinstance(t, PauliTerm):
            x, z = t.masks
            c = t.coefficient
        else:
            c, x, z = t
        coefs.append(c)
        xs.append(x)
        zs.append(z)
    return np.array(coefs, dtype=complex), np.array(xs, dtype=np.int64), np.array(zs, dtype=np.int64)


def expectation(state: QubitState, pauli_sum) -> float:
    """Exact <psi|sum_t c_t P_t|psi> for a Hermitian Pauli sum.

    Terms are ``PauliTerm`` objects or ``(coefficient, x_mask, z_mask)`` tuples.
    """
    coefs, xs, zs = _terms_to_masks(pauli_sum)
    merged: dict = {}
    for c, x, z in zip(coefs, xs, zs):
        merged[(int(x), int(z))] = merged.get((int(x), int(z)), 0.0) + c
    if any(abs(c.imag) > IMAG_TOL for c in merged.values()):
        raise ValueError("expectation requires a Hermitian Pauli sum (real coefficients)")
    if not merged:
        return 0.0
    keys = list(merged)
    vals = kernels.pauli_expectations(
        state.amplitudes,
        state.amplitudes,
        np.array([k[0] for k in keys], dtype=np.int64),
        np.array([k[1] for k in keys], dtype=np.int64),
    )
    total = complex(np.dot(np.array([merged[k].real for k in keys]), vals))
    if abs(total.imag) > IMAG_TOL:
        raise ValueError(f"expectation has imaginary part {total.imag:.3e}")
    return total.real


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def measurement_probabilities(state: QubitState, measured_bases: Sequence[str] | str) -> np.ndarray:
    """Born distribution after rotating each qubit into its measured axis.

    ``measured_bases[i]`` is the axis of qubit ``i``; ``I`` is read as ``Z``.
    """
    if len(measured_bases) != state.n_qubits:
        raise ValueError("need one measurement axis per qubit")
    rotated = state.copy()
    for q, axis in enumerate(measured_bases):
        apply_basis_rotation(rotated, q, "Z" if axis == "I" else axis)
    probs = np.abs(rotated.amplitudes) ** 2
    return probs / probs.sum()


def sample_counts(state: QubitState, measured_bases: Sequence[str] | str, shots: int, seed=None) -> np.ndarray:
    """Histogram (length 2**n, indexed by outcome bitstring) of ``shots`` draws."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    probs = measurement_probabilities(state, measured_bases)
    return as_generator(seed).multinomial(int(shots), probs).astype(np.int64)


def task_rng(master_seed, *task_id: int) -> np.random.Generator:
    """Generator for one independent task, derived from (master seed, task id).

    The stream depends only on the ids, never on scheduling order.
    """
    if master_seed is None:
        raise ValueError("a master seed is required for sampled evaluation")
    return np.random.default_rng(np.random.SeedSequence(int(master_seed), spawn_key=tuple(int(t) for t in task_id)))

"""Simulated readout noise, twirled readout mitigation and number post-selection.

Histograms are dense integer arrays indexed by the measured bitstring, qubit
``q`` in bit ``q``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .forging import DEFAULT_SHOTS, parity_estimates
from .statevector import as_generator, sample_counts

MIN_ATTENUATION = 0.1
DEFAULT_TWIRLS = 16
ORDERS = ("rescale-first", "postselect-first")


class UnreliableMitigationError(RuntimeError):
    pass


class AllRejectedError(RuntimeError):
    pass


@dataclass(frozen=True)
class ReadoutModel:
    """Independent per-qubit bit flips at readout.

    ``p01[q]`` is the probability of reading 1 when qubit ``q`` is in 0,
    ``p10[q]`` the probability of reading 0 when it is in 1.
    """

    p01: tuple[float, ...]
    p10: tuple[float, ...]
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "p01", tuple(float(p) for p in self.p01))
        object.__setattr__(self, "p10", tuple(float(p) for p in self.p10))
        if len(self.p01) != len(self.p10):
            raise ValueError("p01 and p10 need one entry per qubit")
        for p in self.p01 + self.p10:
            if not 0.0 <= p < 0.5:
                raise ValueError(f"flip probability {p} outside [0, 0.5)")

    @classmethod
    def uniform(cls, n_qubits: int, p: float, seed: int | None = None) -> "ReadoutModel":
        return cls((p,) * n_qubits, (p,) * n_qubits, seed)

    @property
    def n_qubits(self) -> int:
        return len(self.p01)

    @property
    def is_noiseless(self) -> bool:
        return not any(self.p01) and not any(self.p10)

    def to_dict(self) -> dict:
        return {"p01": list(self.p01), "p10": list(self.p10), "seed": self.seed}


def _check_hist(counts, n_qubits: int) -> np.ndarray:
    counts = np.asarray(counts)
    if counts.ndim != 1 or counts.size != 1 << n_qubits:
        raise ValueError(f"histogram must have length 2**{n_qubits}")
    if np.any(counts < 0):
        raise ValueError("negative counts")
    return counts.astype(np.int64)


def transition_matrix(model: ReadoutModel) -> np.ndarray:
    """T[b, c] = probability of reading ``c`` when the register holds ``b``."""
    t = np.ones((1, 1))
    # qubit 0 is the low bit, so it is the rightmost kron factor
    for q in range(model.n_qubits):
        p01, p10 = model.p01[q], model.p10[q]
        t = np.kron(np.array([[1.0 - p01, p01], [p10, 1.0 - p10]]), t)
    return t


def corrupt_counts(counts, model: ReadoutModel, rng=None) -> np.ndarray:
    """Flip every shot's bits independently according to ``model``."""
    n = model.n_qubits
    counts = _check_hist(counts, n)
    if model.is_noiseless:
        return counts.copy()
    rng = as_generator(model.seed if rng is None else rng)
    if n <= 10:
        rows = transition_matrix(model)
        seen = np.flatnonzero(counts)
        return rng.multinomial(counts[seen], rows[seen]).sum(axis=0).astype(np.int64)
    outcomes = np.repeat(np.arange(counts.size, dtype=np.int64), counts)
    bits = (outcomes[:, None] >> np.arange(n)) & 1
    p = np.where(bits == 1, np.array(model.p10), np.array(model.p01))
    flips = rng.random(p.shape) < p
    noisy = outcomes ^ (flips.astype(np.int64) << np.arange(n)).sum(axis=1)
    return np.bincount(noisy, minlength=counts.size).astype(np.int64)


def _relabel(counts: np.ndarray, mask: int) -> np.ndarray:
    return counts[np.arange(counts.size) ^ mask]


def twirl_masks(n_qubits: int, n_twirls: int, rng) -> list[int]:
    """Random X layers in complementary pairs, so each qubit is flipped in
    exactly half of the frames and the readout channel is symmetrized."""
    if n_twirls < 2 or n_twirls % 2:
        raise ValueError("n_twirls must be a positive even number")
    full = (1 << n_qubits) - 1
    half = rng.integers(0, 1 << n_qubits, size=n_twirls // 2)
    return [m for h in half for m in (int(h), int(h) ^ full)]


def twirled_counts(ideal_counts, model: ReadoutModel, n_twirls: int = DEFAULT_TWIRLS, rng=None) -> np.ndarray:
    """Noisy histogram of a twirled execution, in the frame of the ideal outcomes.

    The shots are split evenly over the X frames; in each frame the outcome is
    flipped by the X layer, read out through the channel and flipped back.
    """
    n = model.n_qubits
    ideal_counts = _check_hist(ideal_counts, n)
    rng = as_generator(model.seed if rng is None else rng)
    masks = twirl_masks(n, n_twirls, rng)
    total = int(ideal_counts.sum())
    sizes = np.full(n_twirls, total // n_twirls)
    sizes[: total % n_twirls] += 1
    remaining = ideal_counts.copy()
    out = np.zeros_like(ideal_counts)
    for mask, size in zip(masks, sizes):
        part = rng.multivariate_hypergeometric(remaining, int(size))
        remaining -= part
        device = corrupt_counts(_relabel(part, mask), model, rng)
        out += _relabel(device, mask)
    return out


def calibrate(model: ReadoutModel, shots: int, n_twirls: int = DEFAULT_TWIRLS, rng=None) -> np.ndarray:
    """Per-qubit attenuation 1 - 2e of Z from twirled all-0 and all-1 circuits."""
    n = model.n_qubits
    rng = as_generator(model.seed if rng is None else rng)
    full = (1 << n) - 1
    flips = np.zeros(n)
    for prepared in (0, full):
        ideal = np.zeros(1 << n, dtype=np.int64)
        ideal[prepared] = shots
        noisy = twirled_counts(ideal, model, n_twirls, rng)
        wrong = (np.arange(1 << n)[:, None] ^ prepared) >> np.arange(n) & 1
        flips += noisy @ wrong
    attenuation = 1.0 - flips / shots
    if np.any(attenuation < MIN_ATTENUATION):
        raise UnreliableMitigationError(f"calibrated attenuation {attenuation.min():.3f} is below {MIN_ATTENUATION}")
    return attenuation


def post_select(counts, expected_weight: int) -> tuple[np.ndarray, float]:
    """Keep only bitstrings of Hamming weight ``expected_weight``."""
    counts = np.asarray(counts, dtype=np.int64)
    keep = np.bitwise_count(np.arange(counts.size, dtype=np.int64)) == expected_weight
    total = counts.sum()
    kept = counts[keep].sum()
    if total == 0 or kept == 0:
        raise AllRejectedError(f"no shots with Hamming weight {expected_weight}")
    filtered = np.where(keep, counts, 0)
    return filtered, float(kept / total)


def _inverse_channel(vec: np.ndarray, attenuation: np.ndarray) -> np.ndarray:
    """Apply the inverse of the symmetric per-qubit readout channel."""
    n = attenuation.size
    t = vec.reshape((2,) * n)
    for q, f in enumerate(attenuation):
        e = 0.5 * (1.0 - f)
        inv = np.array([[1.0 - e, -e], [-e, 1.0 - e]]) / f
        t = np.moveaxis(np.tensordot(inv, t, axes=([1], [n - 1 - q])), 0, n - 1 - q)
    return t.reshape(-1)


def mitigated_parities(
    counts,
    masks: Sequence[int],
    attenuation,
    expected_weight: int | None = None,
    order: str = "rescale-first",
) -> tuple[np.ndarray, np.ndarray]:
    """Parity expectations corrected for a symmetrized readout channel.

    ``rescale-first`` inverts the channel on the histogram and post-selects
    the resulting quasi-probabilities; ``postselect-first`` filters the raw
    counts and divides each parity by its attenuation.  Covariances follow
    from the multinomial covariance of the histogram by the delta method.
    """
    if order not in ORDERS:
        raise ValueError(f"order must be one of {ORDERS}")
    counts = np.asarray(counts, dtype=np.int64)
    attenuation = np.asarray(attenuation, dtype=float)
    masks = np.asarray(masks, dtype=np.int64)
    exact_channel = np.all(attenuation == 1.0)
    if order == "postselect-first" or exact_channel:
        if expected_weight is not None:
            counts, _ = post_select(counts, expected_weight)
        values, cov = parity_estimates(counts, masks)
        if exact_channel:
            return values, cov
        scale = np.array([np.prod(attenuation[(int(m) >> np.arange(attenuation.size)) & 1 == 1]) for m in masks])
        return values / scale, cov / np.outer(scale, scale)

    shots = counts.sum()
    freq = counts / shots
    outcomes = np.arange(counts.size, dtype=np.int64)
    keep = np.ones(counts.size)
    if expected_weight is not None:
        keep = (np.bitwise_count(outcomes) == expected_weight).astype(float)
    signs = 1.0 - 2.0 * (np.bitwise_count(outcomes[:, None] & masks[None, :]) & 1)
    d = _inverse_channel(keep, attenuation)
    a = np.stack([_inverse_channel(signs[:, j] * keep, attenuation) for j in range(masks.size)], axis=1)
    rate = d @ freq
    if rate <= 0:
        raise AllRejectedError("mitigated acceptance rate is not positive")
    values = (freq @ a) / rate
    grad = (a - np.outer(d, values)) / rate
    cov = (grad.T * freq) @ grad / shots
    return values, cov


def twirled_readout_mitigation(
    ideal_counts,
    masks: Sequence[int],
    model: ReadoutModel,
    n_twirls: int = DEFAULT_TWIRLS,
    seed=None,
) -> tuple[np.ndarray, np.ndarray]:
    """Simulate a twirled noisy execution of a circuit with the given ideal
    outcome histogram and return rescaled parities with their standard errors."""
    rng = as_generator(model.seed if seed is None else seed)
    shots = int(np.sum(ideal_counts))
    noisy = twirled_counts(ideal_counts, model, n_twirls, rng)
    attenuation = calibrate(model, shots, n_twirls, rng)
    values, cov = mitigated_parities(noisy, masks, attenuation)
    return values, np.sqrt(np.diag(cov))


class NoisyEstimator:
    """Shot estimator behind a readout channel with optional mitigation.

    Each measurement setting draws its ideal shots exactly as the noiseless
    estimator would, so with a zero-error model the estimates are identical.
    Post-selection is applied only to settings measured entirely in Z.
    """

    def __init__(
        self,
        model: ReadoutModel,
        shots: int = DEFAULT_SHOTS,
        twirl: bool = True,
        postselect: bool = True,
        order: str = "rescale-first",
        n_twirls: int = DEFAULT_TWIRLS,
    ):
        if shots < 1:
            raise ValueError("shots must be at least 1")
        if order not in ORDERS:
            raise ValueError(f"order must be one of {ORDERS}")
        self.model = model
        self.shots = int(shots)
        self.twirl = twirl
        self.postselect = postselect
        self.order = order
        self.n_twirls = n_twirls

    def estimate(self, state, bases, masks, weight, rng):
        if state.n_qubits != self.model.n_qubits:
            raise ValueError("readout model and register sizes differ")
        ideal = sample_counts(state, bases, self.shots, rng)
        weight = weight if self.postselect and set(bases) <= {"I", "Z"} else None
        if not self.twirl:
            noisy = corrupt_counts(ideal, self.model, rng)
            if weight is not None:
                noisy, _ = post_select(noisy, weight)
            return parity_estimates(noisy, masks)
        noisy = twirled_counts(ideal, self.model, self.n_twirls, rng)
        attenuation = calibrate(self.model, self.shots, self.n_twirls, rng)
        return mitigated_parities(noisy, masks, attenuation, weight, self.order)

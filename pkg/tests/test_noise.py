import numpy as np
import pytest

from forgeqse.forging import parity_estimates
from forgeqse.noise import (
    AllRejectedError,
    NoisyEstimator,
    ReadoutModel,
    UnreliableMitigationError,
    calibrate,
    corrupt_counts,
    mitigated_parities,
    post_select,
    transition_matrix,
    twirl_masks,
    twirled_counts,
    twirled_readout_mitigation,
)
from forgeqse.statevector import QubitState

SHOTS = 100_000


def point_mass(n, index, shots=SHOTS):
    counts = np.zeros(1 << n, dtype=np.int64)
    counts[index] = shots
    return counts


def within(value, expected, sigma, k=5.0):
    return abs(value - expected) < k * sigma


def test_noiseless_model_is_identity():
    counts = np.array([3, 0, 5, 2])
    out = corrupt_counts(counts, ReadoutModel.uniform(2, 0.0), np.random.default_rng(0))
    assert np.array_equal(out, counts) and out is not counts


@pytest.mark.parametrize("n", [1, 3, 5, 11])
def test_untouched_fraction(n):
    out = corrupt_counts(point_mass(n, 0), ReadoutModel.uniform(n, 0.02), np.random.default_rng(n))
    p = 0.98**n
    assert out.sum() == SHOTS
    assert within(out[0] / SHOTS, p, np.sqrt(p * (1 - p) / SHOTS))


def test_single_qubit_parity_shrinks():
    out = corrupt_counts(point_mass(1, 0), ReadoutModel.uniform(1, 0.02), np.random.default_rng(1))
    z = (out[0] - out[1]) / SHOTS
    assert within(z, 1 - 2 * 0.02, np.sqrt((1 - z**2) / SHOTS))


def test_transition_matrix_two_qubits():
    model = ReadoutModel((0.1, 0.2), (0.05, 0.3))
    t = transition_matrix(model)
    assert np.allclose(t.sum(axis=1), 1.0)
    # register 01 (qubit 0 set) read as 10 (qubit 1 set): qubit 0 decays, qubit 1 excites
    assert t[0b01, 0b10] == pytest.approx(0.05 * 0.2)


@pytest.mark.parametrize("n", [3, 11])
def test_flip_rates_per_qubit(n):
    rng = np.random.default_rng(n)
    model = ReadoutModel(tuple(rng.uniform(0, 0.1, n)), tuple(rng.uniform(0, 0.1, n)))
    prepared = 0b101 if n == 3 else 0b10101010101
    out = corrupt_counts(point_mass(n, prepared), model, rng)
    outcomes = np.arange(1 << n)
    for q in range(n):
        flipped = out[((outcomes ^ prepared) >> q) & 1 == 1].sum() / SHOTS
        p = model.p10[q] if (prepared >> q) & 1 else model.p01[q]
        assert within(flipped, p, np.sqrt(p * (1 - p) / SHOTS))


def test_model_validation():
    for bad in (0.5, -0.1):
        with pytest.raises(ValueError):
            ReadoutModel.uniform(2, bad)
    with pytest.raises(ValueError):
        ReadoutModel((0.1,), (0.1, 0.1))
    with pytest.raises(ValueError):
        corrupt_counts([1, 2, 3], ReadoutModel.uniform(2, 0.1))


def test_twirl_masks_come_in_complementary_pairs():
    masks = twirl_masks(3, 8, np.random.default_rng(0))
    assert len(masks) == 8
    assert all(a ^ b == 0b111 for a, b in zip(masks[::2], masks[1::2]))
    with pytest.raises(ValueError):
        twirl_masks(3, 5, np.random.default_rng(0))


def test_twirling_symmetrizes_asymmetric_readout():
    model = ReadoutModel((0.06,), (0.02,))
    z0 = twirled_counts(point_mass(1, 0), model, rng=np.random.default_rng(2))
    z1 = twirled_counts(point_mass(1, 1), model, rng=np.random.default_rng(3))
    f0 = (z0[0] - z0[1]) / SHOTS
    f1 = (z1[1] - z1[0]) / SHOTS
    sigma = np.sqrt(1 / SHOTS)
    assert within(f0, 1 - 0.08, sigma) and within(f1, 1 - 0.08, sigma)


def test_calibrated_rescaling_recovers_ideal_parity():
    model = ReadoutModel.uniform(2, 0.02)
    values, std = twirled_readout_mitigation(point_mass(2, 0b01), [0b01, 0b10, 0b11], model, seed=5)
    for v, e, s in zip(values, [-1.0, 1.0, -1.0], std):
        assert within(v, e, s)


def test_calibration_rejects_weak_signal():
    with pytest.raises(UnreliableMitigationError):
        calibrate(ReadoutModel.uniform(2, 0.49), 20_000, rng=np.random.default_rng(0))
    f = calibrate(ReadoutModel.uniform(2, 0.02), SHOTS, rng=np.random.default_rng(0))
    assert np.all(np.abs(f - 0.96) < 5 * np.sqrt(1 / SHOTS))


def test_post_selection():
    weight2 = point_mass(5, 0b00011)
    kept, rate = post_select(weight2, 2)
    assert rate == 1.0 and np.array_equal(kept, weight2)
    noisy = corrupt_counts(weight2, ReadoutModel.uniform(5, 0.02), np.random.default_rng(4))
    kept, rate = post_select(noisy, 2)
    p = 0.98**5
    assert rate >= p - 5 * np.sqrt(p * (1 - p) / SHOTS)
    again, rate2 = post_select(kept, 2)
    assert np.array_equal(again, kept) and rate2 == 1.0
    with pytest.raises(AllRejectedError):
        post_select(point_mass(2, 0), 1)


def test_rescale_first_inverts_the_channel_exactly():
    # the expected noisy histogram of a weight-2 state, at very large shot count
    rng = np.random.default_rng(7)
    ideal = np.zeros(16)
    weight2 = [i for i in range(16) if bin(i).count("1") == 2]
    ideal[weight2] = rng.dirichlet(np.ones(len(weight2)))
    p = 0.03
    noisy = np.rint(1e12 * ideal @ transition_matrix(ReadoutModel.uniform(4, p))).astype(np.int64)
    masks = list(range(1, 16))
    truth, _ = parity_estimates(np.rint(1e12 * ideal).astype(np.int64), masks)
    f = np.full(4, 1 - 2 * p)
    rescaled, _ = mitigated_parities(noisy, masks, f, expected_weight=2)
    assert np.allclose(rescaled, truth, atol=1e-9)
    filtered, _ = mitigated_parities(noisy, masks, f, expected_weight=2, order="postselect-first")
    assert np.abs(filtered - truth).max() > 1e-3
    with pytest.raises(ValueError):
        mitigated_parities(noisy, masks, f, order="other")


def test_unit_attenuation_is_plain_parity():
    counts = np.array([5, 1, 3, 7])
    a, ca = mitigated_parities(counts, [1, 2, 3], np.ones(2))
    b, cb = parity_estimates(counts, [1, 2, 3])
    assert np.array_equal(a, b) and np.array_equal(ca, cb)


def test_estimator_validation():
    with pytest.raises(ValueError):
        NoisyEstimator(ReadoutModel.uniform(2, 0.01), shots=0)
    with pytest.raises(ValueError):
        NoisyEstimator(ReadoutModel.uniform(2, 0.01), order="other")
    est = NoisyEstimator(ReadoutModel.uniform(2, 0.01))
    with pytest.raises(ValueError):
        est.estimate(QubitState.zero(3), "ZZZ", [1], 0, np.random.default_rng(0))

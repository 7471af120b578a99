import json

import pytest

from forgeqse.chemio import HARTREE_TO_EV
from forgeqse.spectrum import LabeledSpectrum, spin_from_s2, state_label


@pytest.mark.parametrize("s2,spin", [(0.0, 0.0), (0.75, 0.5), (2.0, 1.0), (1.97, 1.0), (-1e-9, 0.0), (6.0, 2.0)])
def test_spin_from_s2(s2, spin):
    assert spin_from_s2(s2) == spin


def test_labels():
    assert state_label(1, 1.0, "B2") == "1³B₂"
    assert state_label(2, 0.0, "A1", ascii_only=True) == "2^1A1"


def test_levels_are_sorted_numbered_and_referenced():
    spec = LabeledSpectrum.from_levels(
        [(-1.0, 1.0, "B2", 2.0), (-1.5, 0.0, "A1", 0.0), (-0.9, 1.0, "B2", 2.0), (-1.2, 0.0, "A1", 0.0)]
    )
    assert [s.ascii_label for s in spec.states] == ["1^1A1", "2^1A1", "1^3B2", "2^3B2"]
    assert spec.ground.excitation_energy == 0.0
    assert spec.states[1].excitation_energy == pytest.approx(0.3 * HARTREE_TO_EV)
    with pytest.raises(ValueError):
        LabeledSpectrum.from_levels([])


def test_sigmas_flags_and_json_round_trip():
    spec = LabeledSpectrum.from_levels([(-1.5, 0.0, "A1", 0.0), (-1.0, 1.0, "B2", 2.0)], "qse", {"mode": "sampled"})
    key = spec.states[1].key
    spec = spec.with_sigmas({key: 0.01}, flagged=[key])
    assert spec.states[1].sigma == 0.01 and spec.states[1].flags == ("unstable",)
    text = spec.to_json()
    again = LabeledSpectrum.from_dict(json.loads(text))
    assert again.states == spec.states and again.metadata == {"mode": "sampled"}
    assert again.to_json() == text

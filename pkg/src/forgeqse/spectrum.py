"""Labeled spectra shared by the CASCI oracle and the subspace expansion."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Iterable

from .chemio import HARTREE_TO_EV

_SUP = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")
_SUB = str.maketrans("0123456789", "₀₁₂₃₄₅₆₇₈₉")


def spin_from_s2(s2: float) -> float:
    """Nearest allowed S (integer or half-integer) for an <S^2> value."""
    s = 0.5 * (math.sqrt(1.0 + 4.0 * max(s2, 0.0)) - 1.0)
    return round(2.0 * s) / 2.0


def state_label(ordinal: int, spin: float, irrep: str, ascii_only: bool = False) -> str:
    mult = int(round(2 * spin + 1))
    if ascii_only:
        return f"{ordinal}^{mult}{irrep}"
    return f"{ordinal}{str(mult).translate(_SUP)}{irrep[0]}{irrep[1:].translate(_SUB)}"


@dataclass(frozen=True)
class SpectrumState:
    energy: float
    spin: float
    irrep: str
    ordinal: int = 0
    excitation_energy: float = 0.0  # eV
    sigma: float = 0.0  # eV
    s2: float = 0.0
    flags: tuple[str, ...] = ()

    @property
    def key(self) -> tuple[float, str, int]:
        return (self.spin, self.irrep, self.ordinal)

    @property
    def label(self) -> str:
        return state_label(self.ordinal, self.spin, self.irrep)

    @property
    def ascii_label(self) -> str:
        return state_label(self.ordinal, self.spin, self.irrep, ascii_only=True)


@dataclass
class LabeledSpectrum:
    states: list[SpectrumState]
    method: str = ""
    metadata: dict = field(default_factory=dict)

    @classmethod
    def from_levels(
        cls, levels: Iterable[tuple[float, float, str, float]], method: str = "", metadata: dict | None = None
    ) -> "LabeledSpectrum":
        """Build from (energy, spin, irrep, s2) tuples: sort, number, reference to the ground state."""
        levels = sorted(levels, key=lambda t: (round(t[0], 9), t[1], t[2]))
        if not levels:
            raise ValueError("empty spectrum")
        e0 = levels[0][0]
        counts: dict = {}
        states = []
        for energy, spin, irrep, s2 in levels:
            n = counts[(spin, irrep)] = counts.get((spin, irrep), 0) + 1
            states.append(
                SpectrumState(
                    energy=float(energy),
                    spin=float(spin),
                    irrep=irrep,
                    ordinal=n,
                    excitation_energy=0.0 if energy == e0 else (energy - e0) * HARTREE_TO_EV,
                    s2=float(s2),
                )
            )
        return cls(states, method, dict(metadata or {}))

    @property
    def ground(self) -> SpectrumState:
        return self.states[0]

    def by_key(self) -> dict:
        return {s.key: s for s in self.states}

    def with_sigmas(self, sigmas: dict, flagged: Iterable = ()) -> "LabeledSpectrum":
        flagged = set(flagged)
        out = []
        for s in self.states:
            flags = s.flags + (("unstable",) if s.key in flagged else ())
            out.append(replace(s, sigma=float(sigmas.get(s.key, 0.0)), flags=flags))
        return LabeledSpectrum(out, self.method, dict(self.metadata))

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "metadata": self.metadata,
            "states": [
                {
                    "label": s.label,
                    "ascii_label": s.ascii_label,
                    "spin": s.spin,
                    "irrep": s.irrep,
                    "ordinal": s.ordinal,
                    "energy_hartree": s.energy,
                    "excitation_energy_ev": s.excitation_energy,
                    "sigma_ev": s.sigma,
                    "s2": s.s2,
                    "flags": list(s.flags),
                }
                for s in self.states
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledSpectrum":
        states = [
            SpectrumState(
                energy=s["energy_hartree"],
                spin=s["spin"],
                irrep=s["irrep"],
                ordinal=s["ordinal"],
                excitation_energy=s["excitation_energy_ev"],
                sigma=s.get("sigma_ev", 0.0),
                s2=s.get("s2", 0.0),
                flags=tuple(s.get("flags", ())),
            )
            for s in d["states"]
        ]
        return cls(states, d.get("method", ""), d.get("metadata", {}))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"

"""Orchestration of CASCI, forging and QSE runs, and the comparison reports."""

from __future__ import annotations

import csv
import functools
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .casci import casci_spectrum
from .chemio import ActiveSpaceSpec, ConfigurationError, FCIDUMPError, MolecularIntegrals, freeze_core, read_fcidump
from .config import RunConfig
from .forging import (
    ForgedAnsatz,
    OptimizationResult,
    forged_expectation,
    load_ansatz,
    make_ansatz,
    optimize_ground_state,
    save_ansatz,
)
from .noise import NoisyEstimator
from .operators import bipartition, build_hamiltonian
from .qse import (
    assemble_matrices,
    block_and_classify,
    bootstrap_uncertainty,
    build_excitation_basis,
    chi_squared,
    replicate_uncertainty,
)
from .spectrum import LabeledSpectrum, state_label

log = logging.getLogger(__name__)

PAIRS = (("casci", "exact"), ("exact", "sampled"), ("sampled", "noisy"))


class StageError(RuntimeError):
    """A numerical failure inside one pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.cause = cause


class AlignmentError(ValueError):
    def __init__(self, orphans: Sequence[str]):
        super().__init__("states missing from one of the spectra: " + ", ".join(orphans))
        self.orphans = list(orphans)


def _stage(name: str):
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            log.info("stage %s", name)
            try:
                return fn(*args, **kwargs)
            except (ConfigurationError, StageError):
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc

        return run

    return wrap


def load_integrals(cfg: RunConfig) -> MolecularIntegrals:
    try:
        ints = read_fcidump(cfg.input_path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read integrals: {exc}") from None
    except FCIDUMPError as exc:
        raise ConfigurationError(f"{cfg.input_path}: {exc}") from None
    active = cfg["active_space"]
    if active:
        spec = ActiveSpaceSpec(tuple(active["orbitals"]), active["electrons"])
        ints = freeze_core(ints, spec, active.get("frozen", ()))
    if ints.n_alpha != ints.n_beta:
        raise ConfigurationError("forging needs a closed-shell (MS2 = 0) active space")
    return ints


def _metadata(cfg: RunConfig, **extra) -> dict:
    meta = {"molecule": cfg["molecule"]}
    meta.update(extra)
    return meta


@_stage("casci")
def run_casci(cfg: RunConfig, ints: MolecularIntegrals) -> LabeledSpectrum:
    result = casci_spectrum(ints)
    result.spectrum.metadata.update(_metadata(cfg, mode="casci"))
    return result.spectrum


@_stage("forge")
def run_forge(cfg: RunConfig, ints: MolecularIntegrals) -> OptimizationResult:
    """Optimize the forged ground state with exact expectations.

    The same parameters are used for every mode, so differences between the
    mode spectra come from the measurement model alone.
    """
    n = ints.n_orbitals
    template = make_ansatz(
        n,
        ints.n_electrons,
        ints.irreps(),
        layout=cfg["ansatz"]["layout"],
        bitstrings=cfg["ansatz"]["bitstrings"],
    )
    op = bipartition(build_hamiltonian(ints), n)
    return optimize_ground_state(template, op, cfg.optimizer())


def _estimator(cfg: RunConfig, mode: str, n_qubits: int):
    if mode != "noisy":
        return None
    mit = cfg["mitigation"]
    return NoisyEstimator(
        cfg.readout_model(n_qubits),
        shots=cfg["shots"],
        twirl=mit["twirl"],
        postselect=mit["postselect"],
        order=mit["order"],
        n_twirls=mit["n_twirls"],
    )


@_stage("qse")
def run_qse(cfg: RunConfig, ints: MolecularIntegrals, ansatz: ForgedAnsatz, mode: str) -> LabeledSpectrum:
    n = ints.n_orbitals
    hamiltonian = build_hamiltonian(ints)
    basis = build_excitation_basis(ansatz.bitstrings[0], ints.irreps())
    estimator = _estimator(cfg, mode, n)
    seed = cfg["seed"] if mode != "exact" else None
    qcfg = cfg["qse"]
    op = bipartition(hamiltonian, n)
    forged = forged_expectation(
        ansatz, op, mode, seed=seed, shots=cfg["shots"], estimator=estimator, threads=cfg["threads"]
    )
    matrices = assemble_matrices(
        ansatz,
        basis,
        hamiltonian,
        mode,
        seed=seed,
        shots=cfg["shots"],
        estimator=estimator,
        n_replicates=qcfg["replicates"],
        threads=cfg["threads"],
    )
    spectrum = block_and_classify(matrices, basis, qcfg["eps_m"], qcfg["eps_s"], method="ef-qse")
    if mode != "exact":
        if qcfg["uncertainty"] == "bootstrap":
            sigmas, unstable = bootstrap_uncertainty(
                matrices, basis, qcfg["resamples"], seed=seed, eps_m=qcfg["eps_m"], eps_s=qcfg["eps_s"]
            )
        else:
            sigmas, unstable = replicate_uncertainty(matrices, basis, qcfg["eps_m"], qcfg["eps_s"])
        spectrum = spectrum.with_sigmas(sigmas, unstable)
    spectrum.metadata.update(
        _metadata(
            cfg,
            mode=mode,
            shots=None if mode == "exact" else cfg["shots"],
            seed=seed,
            forged_energy=forged.value,
            forged_sigma=forged.sigma,
            basis_size=len(basis),
        )
    )
    return spectrum


# ---------------------------------------------------------------------------
# Reports


@dataclass(frozen=True)
class DeviationSummary:
    reference: str
    other: str
    n_states: int
    minimum: float
    maximum: float
    mean: float
    mean_sigma: float
    chi2: float | None

    def as_row(self) -> dict:
        return {
            "pair": f"{self.reference}-vs-{self.other}",
            "n_states": self.n_states,
            "min_ddE_ev": self.minimum,
            "max_ddE_ev": self.maximum,
            "mean_ddE_ev": self.mean,
            "mean_sigma_ev": self.mean_sigma,
            "chi2": self.chi2,
        }


def _aligned(reference: LabeledSpectrum, other: LabeledSpectrum, states=None):
    ref, oth = reference.by_key(), other.by_key()
    keys = list(states) if states is not None else [s.key for s in other.states]
    orphans = [state_label(k[2], k[0], k[1], ascii_only=True) for k in keys if k not in ref or k not in oth]
    if orphans:
        raise AlignmentError(orphans)
    ground = (reference.ground.key, other.ground.key)
    return [(ref[k], oth[k]) for k in keys if k not in ground]


def compare_spectra(
    reference: LabeledSpectrum, other: LabeledSpectrum, states=None, names: tuple[str, str] = ("a", "b")
) -> DeviationSummary:
    """Signed excitation-energy deviations other - reference over shared labels.

    States are matched by (spin, irrep, ordinal) only; ``states`` restricts
    the comparison to the given keys.  Ground states are left out since their
    excitation energy is zero by definition.
    """
    pairs = _aligned(reference, other, states)
    if not pairs:
        return DeviationSummary(*names, 0, 0.0, 0.0, 0.0, 0.0, None)
    dev = np.array([b.excitation_energy - a.excitation_energy for a, b in pairs])
    sig = np.array([np.hypot(a.sigma, b.sigma) for a, b in pairs])
    chi2 = chi_squared(dev, sig) if np.all(sig > 0) else (0.0 if not dev.any() else None)
    return DeviationSummary(
        names[0], names[1], len(pairs), float(dev.min()), float(dev.max()), float(dev.mean()), float(sig.mean()), chi2
    )


def deviation_report(spectra: Mapping[str, LabeledSpectrum], states=None) -> list[DeviationSummary]:
    """CASCI vs exact, exact vs sampled and sampled vs noisy, for whichever are present."""
    return [
        compare_spectra(spectra[a], spectra[b], states, (a, b)) for a, b in PAIRS if a in spectra and b in spectra
    ]


def report_states(spectra: Mapping[str, LabeledSpectrum], n_states: int) -> list:
    """Labels of the lowest states of the noiseless subspace spectrum."""
    anchor = spectra.get("exact") or next(iter(spectra.values()))
    return [s.key for s in anchor.states[:n_states]]


def _fmt(x: float | None, width: int = 12) -> str:
    return f"{'':>{width}}" if x is None else f"{x:>{width}.6f}"


def comparison_table(spectra: Mapping[str, LabeledSpectrum], states) -> str:
    """Aligned-column CSV: one row per state, excitation energy per mode and sigma."""
    modes = [m for m in ("casci", "exact", "sampled", "noisy") if m in spectra]
    header = ["state".ljust(8), "spin".rjust(5), "irrep".rjust(5)]
    for m in modes:
        header.append(f"dE_{m}_ev".rjust(16))
        if m in ("sampled", "noisy"):
            header.append(f"sigma_{m}_ev".rjust(16))
    lines = [",".join(header)]
    by_key = {m: spectra[m].by_key() for m in modes}
    for key in states:
        anchor = next(by_key[m][key] for m in modes if key in by_key[m])
        row = [anchor.ascii_label.ljust(8), f"{anchor.spin:>5.1f}", anchor.irrep.rjust(5)]
        for m in modes:
            s = by_key[m].get(key)
            row.append(_fmt(None if s is None else s.excitation_energy, 16))
            if m in ("sampled", "noisy"):
                row.append(_fmt(None if s is None else s.sigma, 16))
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def read_comparison(text: str) -> list[dict]:
    reader = csv.DictReader(io.StringIO(text), skipinitialspace=True)
    return [{k.strip(): v.strip() for k, v in row.items()} for row in reader]


def deviation_table(summaries: Sequence[DeviationSummary]) -> str:
    cols = ["pair", "n_states", "min_ddE_ev", "max_ddE_ev", "mean_ddE_ev", "mean_sigma_ev", "chi2"]
    lines = [",".join(c.rjust(20) if i else c.ljust(18) for i, c in enumerate(cols))]
    for s in summaries:
        row = s.as_row()
        cells = [row["pair"].ljust(18), f"{row['n_states']:>20d}"]
        cells += [_fmt(row[c], 20) for c in cols[2:]]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Bundle


@dataclass
class RunArtifacts:
    output_dir: Path
    casci: LabeledSpectrum | None = None
    ansatz: ForgedAnsatz | None = None
    forged_energy: float | None = None
    spectra: dict = field(default_factory=dict)
    deviations: list = field(default_factory=list)

    def all_spectra(self) -> dict:
        out = {"casci": self.casci} if self.casci is not None else {}
        out.update(self.spectra)
        return out


def _write(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def spectrum_path(output: Path, mode: str) -> Path:
    return output / f"spectrum_{mode}.json"


def write_resolved_config(cfg: RunConfig, output: Path) -> None:
    output.mkdir(parents=True, exist_ok=True)
    _write(output / "resolved_config.yaml", cfg.to_yaml())


def write_ansatz(result: OptimizationResult, output: Path) -> None:
    save_ansatz(result.ansatz, output / "ansatz.json")
    record = {"energy_hartree": result.energy, "converged": result.converged, "n_evaluations": result.n_evaluations}
    _write(output / "forged_energy.json", json.dumps(record, indent=2, sort_keys=True) + "\n")


def read_bundle(output: Path) -> dict:
    """Spectra found in a run directory, keyed by mode."""
    out = {}
    for mode in ("casci", "exact", "sampled", "noisy"):
        p = spectrum_path(output, mode)
        if p.exists():
            out[mode] = LabeledSpectrum.from_dict(json.loads(p.read_text(encoding="utf-8")))
    return out


def write_reports(spectra: Mapping[str, LabeledSpectrum], output: Path, n_states: int) -> list[DeviationSummary]:
    states = report_states({m: s for m, s in spectra.items() if m != "casci"} or spectra, n_states)
    summaries = deviation_report(spectra, states)
    _write(output / "comparison.csv", comparison_table(spectra, states))
    _write(output / "deviations.csv", deviation_table(summaries))
    return summaries


def run_pipeline(cfg: RunConfig, stages: Sequence[str] = ("casci", "forge", "qse", "compare")) -> RunArtifacts:
    """Run the requested stages in order, writing each output as soon as it exists.

    Later stages pick up earlier outputs from the output directory when those
    stages are not part of this run.
    """
    output = cfg.output_dir
    write_resolved_config(cfg, output)
    art = RunArtifacts(output)
    ints = load_integrals(cfg)

    if "casci" in stages:
        art.casci = run_casci(cfg, ints)
        _write(spectrum_path(output, "casci"), art.casci.to_json())

    if "forge" in stages:
        result = run_forge(cfg, ints)
        write_ansatz(result, output)
        art.ansatz, art.forged_energy = result.ansatz, result.energy
    elif "qse" in stages:
        try:
            art.ansatz = load_ansatz(output / "ansatz.json")
        except FileNotFoundError:
            raise ConfigurationError(f"no ansatz.json in {output}; run the forge stage first") from None

    if "qse" in stages:
        for mode in cfg.modes:
            spectrum = run_qse(cfg, ints, art.ansatz, mode)
            art.spectra[mode] = spectrum
            _write(spectrum_path(output, mode), spectrum.to_json())

    if "compare" in stages:
        spectra = read_bundle(output)
        spectra.update(art.all_spectra())
        art.deviations = _compare(spectra, output, cfg["report_states"])
    return art


@_stage("compare")
def _compare(spectra, output, n_states):
    return write_reports(spectra, output, n_states)

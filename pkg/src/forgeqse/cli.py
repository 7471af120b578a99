"""Command-line entry point: ``forgeqse <command> --config run.yaml``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .chemio import ConfigurationError
from .config import MODES, RunConfig
from .pipeline import (
    AlignmentError,
    StageError,
    deviation_report,
    deviation_table,
    read_bundle,
    report_states,
    run_pipeline,
    write_reports,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

STAGES = {
    "casci": ("casci",),
    "forge": ("forge",),
    "qse": ("qse",),
    "compare": ("compare",),
    "run": ("casci", "forge", "qse", "compare"),
}


def _common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", type=Path, required=config_required, help="YAML run configuration")
    p.add_argument("--input", help="FCIDUMP path, overriding the configuration")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--shots", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--output", help="output directory")
    p.add_argument("--threads", type=int)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forgeqse", description="Entanglement-forged ground states and QSE excited states.")
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "casci": "exact active-space spectrum",
        "forge": "optimize the forged ground state",
        "qse": "subspace-expansion spectra for the configured mode and those below it",
        "compare": "write comparison.csv and deviations.csv from a run directory",
        "run": "all of the above in order",
    }
    for name, text in helps.items():
        _common(sub.add_parser(name, help=text), config_required=name != "compare")
    rep = sub.add_parser("report", help="print the spectra and deviation summary of a run directory")
    rep.add_argument("--output", required=True, type=Path, help="run directory")
    rep.add_argument("--states", type=int, default=10, help="number of states to list")
    return parser


def _overrides(args) -> dict:
    out = {k: getattr(args, k) for k in ("mode", "shots", "seed", "output", "threads")}
    if args.input:
        out["input"] = str(Path(args.input).resolve())
    return out


def _report(output: Path, n_states: int) -> int:
    spectra = read_bundle(output)
    if not spectra:
        raise ConfigurationError(f"no spectra found in {output}")
    modes = list(spectra)
    states = report_states({m: s for m, s in spectra.items() if m != "casci"} or spectra, n_states)
    print("state     " + "".join(f"{m:>22}" for m in modes))
    for key in states:
        cells = []
        for m in modes:
            s = spectra[m].by_key().get(key)
            if s is None:
                cells.append(f"{'-':>22}")
            elif s.sigma:
                cells.append(f"{s.excitation_energy:>12.4f} +- {s.sigma:<6.4f}")
            else:
                cells.append(f"{s.excitation_energy:>22.4f}")
        label = next(spectra[m].by_key()[key].label for m in modes if key in spectra[m].by_key())
        print(f"{label:<10}" + "".join(cells))
    print()
    print(deviation_table(deviation_report(spectra, states)), end="")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING, format="%(message)s")
    try:
        if args.command == "report":
            return _report(args.output, args.states)
        if args.command == "compare" and args.config is None:
            if args.output is None:
                raise ConfigurationError("compare needs --config or --output")
            out = Path(args.output)
            write_reports(read_bundle(out), out, 10)
            return EXIT_OK
        cfg = RunConfig.load(args.config, _overrides(args))
        run_pipeline(cfg, STAGES[args.command])
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StageError, AlignmentError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

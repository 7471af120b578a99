"""Run configuration: a YAML document validated against a JSON schema."""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema
import yaml

from .chemio import ConfigurationError
from .forging import DEFAULT_SHOTS, OptimizerConfig
from .noise import DEFAULT_TWIRLS, ORDERS, ReadoutModel
from .qse import DEFAULT_REPLICATES, DEFAULT_RESAMPLES, EPS_S

MODES = ("exact", "sampled", "noisy")

_PROB = {"type": "number", "minimum": 0.0, "exclusiveMaximum": 0.5}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["input"],
    "properties": {
        "input": {"type": "string"},
        "molecule": {"type": ["string", "null"]},
        "active_space": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "required": ["orbitals", "electrons"],
            "properties": {
                "orbitals": {"type": "array", "items": {"type": "integer", "minimum": 0}, "minItems": 1},
                "electrons": {"type": "integer", "minimum": 0},
                "frozen": {"type": "array", "items": {"type": "integer", "minimum": 0}},
            },
        },
        "mode": {"enum": list(MODES)},
        "shots": {"type": "integer", "minimum": 1},
        "seed": {"type": ["integer", "null"], "minimum": 0},
        "threads": {"type": "integer", "minimum": 1},
        "output": {"type": "string"},
        "ansatz": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "layout": {"enum": ["default", "symmetric", "brick"]},
                "bitstrings": {"type": ["array", "null"], "items": {"type": "string", "pattern": "^[01]+$"}},
            },
        },
        "optimizer": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "max_iterations": {"type": "integer", "minimum": 1},
                "restarts": {"type": "integer", "minimum": 1},
                "tolerance": {"type": "number", "exclusiveMinimum": 0},
                "seed": {"type": "integer", "minimum": 0},
                "init_scale": {"type": "number", "minimum": 0},
            },
        },
        "noise": {
            "type": ["object", "null"],
            "additionalProperties": False,
            "properties": {
                "p": _PROB,
                "p01": {"type": "array", "items": _PROB},
                "p10": {"type": "array", "items": _PROB},
            },
        },
        "mitigation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "twirl": {"type": "boolean"},
                "postselect": {"type": "boolean"},
                "order": {"enum": list(ORDERS)},
                "n_twirls": {"type": "integer", "minimum": 2, "multipleOf": 2},
            },
        },
        "qse": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "eps_m": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "eps_s": {"type": "number", "exclusiveMinimum": 0},
                "uncertainty": {"enum": ["bootstrap", "replicate"]},
                "resamples": {"type": "integer", "minimum": 2},
                "replicates": {"type": "integer", "minimum": 2},
            },
        },
        "report_states": {"type": "integer", "minimum": 1},
    },
}

DEFAULTS = {
    "molecule": None,
    "active_space": None,
    "mode": "exact",
    "shots": DEFAULT_SHOTS,
    "seed": None,
    "threads": 1,
    "output": "forgeqse-run",
    "ansatz": {"layout": "default", "bitstrings": None},
    "optimizer": {
        "max_iterations": OptimizerConfig.max_iterations,
        "restarts": OptimizerConfig.restarts,
        "tolerance": OptimizerConfig.tolerance,
        "seed": OptimizerConfig.seed,
        "init_scale": OptimizerConfig.init_scale,
    },
    "noise": None,
    "mitigation": {"twirl": True, "postselect": True, "order": "rescale-first", "n_twirls": DEFAULT_TWIRLS},
    "qse": {
        "eps_m": None,
        "eps_s": EPS_S,
        "uncertainty": "bootstrap",
        "resamples": DEFAULT_RESAMPLES,
        "replicates": DEFAULT_REPLICATES,
    },
    "report_states": 10,
}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


@dataclass
class RunConfig:
    """Validated run settings; ``data`` holds the fully resolved document."""

    data: dict
    base_dir: Path = field(default_factory=Path.cwd)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None, overrides: dict | None = None) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigurationError("configuration must be a mapping")
        raw = _merge(raw, {k: v for k, v in (overrides or {}).items() if v is not None})
        try:
            jsonschema.validate(raw, SCHEMA)
        except jsonschema.ValidationError as exc:
            where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
            raise ConfigurationError(f"{where}: {exc.message}") from None
        cfg = cls(_merge(DEFAULTS, raw), Path(base_dir) if base_dir else Path.cwd())
        cfg.check()
        return cfg

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "RunConfig":
        path = Path(path)
        try:
            raw = yaml.safe_load(path.read_text())
        except OSError as exc:
            raise ConfigurationError(f"cannot read configuration: {exc}") from None
        except yaml.YAMLError as exc:
            raise ConfigurationError(f"malformed YAML: {exc}") from None
        return cls.from_dict(raw or {}, path.parent, overrides)

    def check(self) -> None:
        d = self.data
        if d["mode"] != "exact" and d["seed"] is None:
            raise ConfigurationError(f"mode {d['mode']!r} needs a seed")
        if d["mode"] == "noisy" and not d["noise"]:
            raise ConfigurationError("noisy mode needs a noise model")
        noise = d["noise"] or {}
        if "p" in noise and ("p01" in noise or "p10" in noise):
            raise ConfigurationError("give either a uniform rate p or per-qubit p01/p10, not both")
        if ("p01" in noise) != ("p10" in noise):
            raise ConfigurationError("per-qubit rates need both p01 and p10")

    def __getitem__(self, key):
        return self.data[key]

    @property
    def mode(self) -> str:
        return self.data["mode"]

    @property
    def modes(self) -> list[str]:
        """Every mode up to the requested one; the exact run anchors comparisons."""
        return list(MODES[: MODES.index(self.mode) + 1])

    @property
    def input_path(self) -> Path:
        p = Path(self.data["input"])
        return p if p.is_absolute() else self.base_dir / p

    @property
    def output_dir(self) -> Path:
        return Path(self.data["output"])

    def optimizer(self) -> OptimizerConfig:
        return OptimizerConfig(**self.data["optimizer"])

    def readout_model(self, n_qubits: int) -> ReadoutModel:
        noise = self.data["noise"]
        if not noise:
            raise ConfigurationError("no noise model configured")
        if "p" in noise:
            return ReadoutModel.uniform(n_qubits, noise["p"])
        if len(noise["p01"]) != n_qubits or len(noise["p10"]) != n_qubits:
            raise ConfigurationError(f"per-qubit noise rates need {n_qubits} entries")
        return ReadoutModel(tuple(noise["p01"]), tuple(noise["p10"]))

    def resolved(self) -> dict:
        out = copy.deepcopy(self.data)
        out["input"] = str(self.input_path)
        return out

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.resolved(), sort_keys=True, default_flow_style=False)

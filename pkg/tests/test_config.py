import pytest
import yaml

from forgeqse.chemio import ConfigurationError
from forgeqse.config import RunConfig


def make(**extra):
    return RunConfig.from_dict({"input": "h2.fcidump", **extra}, base_dir="/runs")


def test_defaults_and_ladder():
    cfg = make()
    assert cfg.mode == "exact" and cfg.modes == ["exact"]
    assert cfg["report_states"] == 10
    assert str(cfg.input_path) == "/runs/h2.fcidump"
    assert make(mode="noisy", seed=1, noise={"p": 0.02}).modes == ["exact", "sampled", "noisy"]


def test_overrides_win_and_none_is_ignored():
    cfg = RunConfig.from_dict({"input": "a", "shots": 10}, overrides={"shots": 99, "seed": None})
    assert cfg["shots"] == 99 and cfg["seed"] is None


def test_nested_defaults_merge():
    cfg = make(qse={"eps_s": 0.2})
    assert cfg["qse"]["eps_s"] == 0.2 and cfg["qse"]["uncertainty"] == "bootstrap"


@pytest.mark.parametrize(
    "raw",
    [
        {},
        {"input": "a", "colour": "red"},
        {"input": "a", "mode": "fast"},
        {"input": "a", "shots": 0},
        {"input": "a", "noise": {"p": 0.5}},
        {"input": "a", "mitigation": {"n_twirls": 3}},
        {"input": "a", "ansatz": {"bitstrings": ["10", "1x"]}},
        {"input": "a", "mode": "sampled"},
        {"input": "a", "mode": "noisy", "seed": 1},
        {"input": "a", "noise": {"p": 0.1, "p01": [0.1]}},
        {"input": "a", "noise": {"p01": [0.1]}},
    ],
)
def test_invalid_documents(raw):
    with pytest.raises(ConfigurationError):
        RunConfig.from_dict(raw)


def test_readout_model():
    cfg = make(mode="noisy", seed=1, noise={"p01": [0.01, 0.02], "p10": [0.03, 0.04]})
    model = cfg.readout_model(2)
    assert model.p01 == (0.01, 0.02) and model.p10 == (0.03, 0.04)
    with pytest.raises(ConfigurationError):
        cfg.readout_model(3)
    with pytest.raises(ConfigurationError):
        make().readout_model(2)
    assert make(mode="noisy", seed=1, noise={"p": 0.02}).readout_model(3).p10 == (0.02,) * 3


def test_load_from_file(tmp_path):
    path = tmp_path / "run.yaml"
    path.write_text("input: x.fcidump\nmode: sampled\nseed: 4\n")
    cfg = RunConfig.load(path, {"shots": 500})
    assert cfg.input_path == tmp_path / "x.fcidump" and cfg["shots"] == 500
    again = yaml.safe_load(cfg.to_yaml())
    assert again["input"] == str(tmp_path / "x.fcidump") and again["seed"] == 4
    with pytest.raises(ConfigurationError):
        RunConfig.load(tmp_path / "missing.yaml")
    path.write_text("input: [unclosed\n")
    with pytest.raises(ConfigurationError):
        RunConfig.load(path)
    path.write_text("- a\n- b\n")
    with pytest.raises(ConfigurationError):
        RunConfig.load(path)

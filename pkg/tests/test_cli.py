import subprocess
import sys

import pytest
import yaml

from _systems import TWO_BY_TWO, fixture_path
from forgeqse.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main


@pytest.fixture
def run_yaml(tmp_path):
    def write(**extra):
        path = tmp_path / "run.yaml"
        doc = {"input": str(fixture_path(TWO_BY_TWO[0])), "output": str(tmp_path / "out"), **extra}
        path.write_text(yaml.safe_dump(doc))
        return path

    return write


def test_full_run_and_report(run_yaml, tmp_path, capsys):
    cfg = run_yaml(mode="sampled", seed=2, shots=5_000)
    assert main(["run", "--config", str(cfg)]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "spectrum_sampled.json").exists()
    capsys.readouterr()
    assert main(["report", "--output", str(out), "--states", "3"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "casci-vs-exact" in text and "exact-vs-sampled" in text
    assert len([line for line in text.splitlines() if line.startswith("1")]) >= 1


def test_stage_subcommands(run_yaml, tmp_path):
    cfg = str(run_yaml())
    for command in ("casci", "forge", "qse", "compare"):
        assert main([command, "--config", cfg]) == EXIT_OK
    (tmp_path / "out" / "comparison.csv").unlink()
    assert main(["compare", "--output", str(tmp_path / "out")]) == EXIT_OK
    assert (tmp_path / "out" / "comparison.csv").exists()


def test_command_line_overrides(run_yaml, tmp_path):
    cfg = run_yaml()
    other = tmp_path / "elsewhere"
    assert main(["casci", "--config", str(cfg), "--output", str(other)]) == EXIT_OK
    resolved = yaml.safe_load((other / "resolved_config.yaml").read_text())
    assert resolved["output"] == str(other)


@pytest.mark.parametrize(
    "argv_extra,doc",
    [
        (["--seed", "-1"], {}),
        ([], {"mode": "sampled"}),
        ([], {"colour": "red"}),
        (["--input", "/no/such/file"], {}),
    ],
)
def test_configuration_errors(run_yaml, argv_extra, doc, capsys):
    assert main(["run", "--config", str(run_yaml(**doc)), *argv_extra]) == EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_missing_inputs(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == EXIT_CONFIG
    assert main(["compare"]) == EXIT_CONFIG
    assert main(["report", "--output", str(tmp_path)]) == EXIT_CONFIG


def test_numerical_failure_exit_code(run_yaml, capsys):
    cfg = run_yaml(mode="noisy", seed=1, shots=2_000, noise={"p": 0.49})
    assert main(["run", "--config", str(cfg)]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err


def test_module_entry_point(run_yaml):
    proc = subprocess.run(
        [sys.executable, "-m", "forgeqse.cli", "casci", "--config", str(run_yaml())], capture_output=True, text=True
    )
    assert proc.returncode == EXIT_OK, proc.stderr

import json
from pathlib import Path

import pytest
import yaml

from app import EXIT_INVALID, EXIT_OK, EXIT_WRITE, build_parser, main, overrides_from
from src.config import OUTPUT_DIR_ENV

EVENTS = Path(__file__).resolve().parent.parent / "configs" / "events"
FAST = ["--replicates", "20", "--n", "200", "--workers", "1"]


@pytest.fixture(autouse=True)
def _no_env_output_dir(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)


def _config(tmp_path, **fields) -> str:
    path = tmp_path / "experiment.yaml"
    path.write_text(yaml.safe_dump({"name": "cli", "process": "iid", "tau_prime": [1.0], **fields}))
    return str(path)


def test_parser_overrides():
    args = build_parser().parse_args(["run", "x.yaml", "--seed", "4", "--blocks", "sqrt", "--format", "json"])
    overrides = overrides_from(args)
    assert overrides["seed"] == 4
    assert overrides["blocks"] == "sqrt"
    assert overrides["formats"] == ["json"]
    assert overrides["n"] is None
    assert build_parser().parse_args(["run", "x.yaml", "--blocks", "12"]).blocks == 12


def test_parser_rejects_bad_blocks():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "x.yaml", "--blocks", "many"])


def test_run_writes_report(tmp_path):
    out = tmp_path / "out"
    assert main(["run", _config(tmp_path), "--out", str(out), *FAST]) == EXIT_OK
    report = json.loads((out / "report.json").read_text())
    assert report["replicates"] == 20
    assert (out / "estimates.csv").exists()


def test_preset_with_overrides(tmp_path):
    out = tmp_path / "preset"
    assert main(["preset", "iid-null", "--out", str(out), "--format", "json", *FAST]) == EXIT_OK
    assert sorted(p.name for p in out.iterdir()) == ["report.json"]


def test_diagnose(tmp_path):
    path = _config(tmp_path, process="ex62", tau_prime=[1.0, 2.0], n_grid=[100, 200])
    out = tmp_path / "diag"
    assert main(["diagnose", path, "--out", str(out), *FAST]) == EXIT_OK
    assert (out / "diagnostics.json").exists()
    assert (out / "plot_h_sum.csv").exists()


def test_oracle(capsys):
    assert main(["oracle", str(EVENTS / "complement.yaml")]) == EXIT_OK
    result = json.loads(capsys.readouterr().out)
    assert result["probability"] == pytest.approx(0.36)


@pytest.mark.parametrize("argv", [
    ["run", "missing.yaml"],
    ["preset", "no-such-preset"],
])
def test_invalid_input_exit_code(tmp_path, argv):
    assert main(argv) == EXIT_INVALID


def test_invalid_config_exit_code(tmp_path):
    assert main(["run", _config(tmp_path, n=1)]) == EXIT_INVALID
    assert main(["run", _config(tmp_path, tau_prime=[1.0, 1.0])]) == EXIT_INVALID


def test_write_error_exit_code(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    assert main(["run", _config(tmp_path), "--out", str(blocker / "sub"), *FAST]) == EXIT_WRITE

import json
import subprocess
import sys

import pytest

from clusterflow import cli

RUNS = {
    "verify-prep": ["verify-prep", "--nx", "1", "--ny", "2", "--layers", "2", "--seed", "5"],
    "simulate": ["simulate", "--nx", "2", "--ny", "1", "--layers", "2", "--trace"],
    "threshold": ["threshold", "--d", "3", "5", "--p", "0.02", "0.04", "--trials", "300", "--seed", "9"],
    "threshold-loss": ["threshold", "--d", "3", "--p", "0.02", "--ploss", "0.02", "--trials", "50", "--seed", "9"],
    "estimate": ["estimate"],
}


def run(args, out):
    return cli.main(args + ["--out", str(out)])


def files(path):
    return {p.name: p.read_bytes() for p in sorted(path.iterdir())}


@pytest.mark.parametrize("name", sorted(RUNS))
def test_rerun_is_byte_identical(name, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(RUNS[name], a) == 0
    assert run(RUNS[name], b) == 0
    assert files(a) == files(b) and files(a)


def test_verify_prep_outputs(tmp_path, capsys):
    assert run(["verify-prep", "--seed", "1"], tmp_path) == 0
    data = json.loads((tmp_path / "verification.json").read_text())
    assert data["violated"] == 0 and data["qubits"] == 164 and data["seed"] == 1
    assert "violated=0" in capsys.readouterr().out


def test_generated_seed_is_recorded_and_replays(tmp_path, capsys):
    assert run(["threshold", "--d", "3", "--p", "0.03", "--trials", "200"], tmp_path / "a") == 0
    seed = json.loads((tmp_path / "a" / "crossing.json").read_text())["seed"]
    assert f"seed={seed}" in capsys.readouterr().out
    assert run(["threshold", "--d", "3", "--p", "0.03", "--trials", "200", "--seed", str(seed)], tmp_path / "b") == 0
    assert files(tmp_path / "a") == files(tmp_path / "b")


def test_inject_fault_exit_code(tmp_path, capsys):
    assert run(["verify-prep", "--inject-fault", "--seed", "0"], tmp_path) == 2
    assert "RoutingError" in capsys.readouterr().err
    assert json.loads((tmp_path / "verification.json").read_text())["error"] == "RoutingError"


def test_simulate_reports_chip_counts(tmp_path):
    assert run(["simulate", "--nx", "5", "--ny", "5", "--layers", "1"], tmp_path) == 0
    data = json.loads((tmp_path / "simulation.json").read_text())
    assert data["chips"] == 120 and data["layout_chips"] == 240
    assert not (tmp_path / "trace.jsonl").exists()


def test_estimate_values_and_domain_error(tmp_path, capsys):
    assert run(["estimate"], tmp_path) == 0
    values = json.loads((tmp_path / "report.json").read_text())["values"]
    assert values["distance"] == 17 and values["chips"] == 3320
    assert run(["estimate", "--p", "0.01"], tmp_path) == 3
    assert "no protection" in capsys.readouterr().err


@pytest.mark.parametrize(
    "args",
    [
        [],
        ["bogus"],
        ["verify-prep", "--nx", "0"],
        ["simulate", "--gamma", "x"],
        ["threshold", "--d", "1"],
        ["threshold", "--p", "1.5"],
        ["threshold", "--ploss", "0.1", "--method", "fast"],
        ["estimate", "--table", "draft"],
    ],
)
def test_usage_errors_exit_64(args):
    with pytest.raises(SystemExit) as exc:
        cli.main(args)
    assert exc.value.code == 64


def test_env_var_sets_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["estimate"]) == 0
    assert (tmp_path / "env" / "report.json").exists()


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "clusterflow", "estimate", "--out", str(tmp_path)], capture_output=True, text=True
    )
    assert proc.returncode == 0 and "d=17" in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "clusterflow"], capture_output=True, text=True)
    assert proc.returncode == 64

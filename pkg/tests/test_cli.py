import json

import pytest

from torusflow.cli import EXIT_ACCEPTANCE, EXIT_NUMERICAL, EXIT_OK, EXIT_USAGE, main
from torusflow.runner import preset_toml


@pytest.fixture
def zero_config(tmp_path):
    def make(**edits):
        text = preset_toml("lamella-zero")
        for old, new in edits.items():
            text = text.replace(old, new)
        p = tmp_path / "cfg.toml"
        p.write_text(text)
        return p
    return make


def test_usage_errors_exit_1(capsys):
    with pytest.raises(SystemExit) as ei:
        main(["frobnicate"])
    assert ei.value.code == EXIT_USAGE
    with pytest.raises(SystemExit) as ei:
        main([])
    assert ei.value.code == EXIT_USAGE


def test_missing_config_exit_1(tmp_path):
    assert main(["simulate", str(tmp_path / "nope.toml")]) == EXIT_USAGE


def test_simulate_ok(zero_config, tmp_path, capsys):
    assert main(["simulate", str(zero_config()), "--output-dir", str(tmp_path / "o")]) == EXIT_OK
    m = json.loads(capsys.readouterr().out)
    assert m["name"] == "lamella-zero" and m["error"] is None
    assert (tmp_path / "o" / "lamella-zero" / "manifest.json").exists()


def test_simulate_acceptance_failure(zero_config, tmp_path):
    cfg = zero_config(**{"volume_tol = 1e-10": "volume_tol = -1.0"})
    assert main(["simulate", str(cfg), "--output-dir", str(tmp_path)]) == EXIT_ACCEPTANCE


def test_simulate_numerical_failure(zero_config, tmp_path, capsys):
    cfg = zero_config(**{"monotone_tol = 1e-12": "monotone_tol = -1.0",
                         "max_halvings = 20": "max_halvings = 0"})
    assert main(["simulate", str(cfg), "--output-dir", str(tmp_path)]) == EXIT_NUMERICAL
    assert "[flow] StepFailed" in capsys.readouterr().err


def test_diagnose_and_norms(zero_config, tmp_path, capsys):
    text = preset_toml("lamella-random-small")
    cfg = tmp_path / "r.toml"
    cfg.write_text(text)
    assert main(["simulate", str(cfg), "--output-dir", str(tmp_path)]) == EXIT_OK
    traj = tmp_path / "lamella-random-small" / "trajectory"
    capsys.readouterr()
    out = tmp_path / "diag"
    assert main(["diagnose", str(traj), "--no-asymmetry", "--csv", "t,perimeter_gap",
                 "--output-dir", str(out)]) == EXIT_OK
    lines = (out / "diagnostics.ndjson").read_text().splitlines()
    assert len(lines) == 11
    assert (out / "diagnostics.csv").read_text().splitlines()[0] == "t,perimeter_gap"
    capsys.readouterr()
    assert main(["norms", str(traj), "--beta", "0.5"]) == EXIT_OK
    reports = [json.loads(x) for x in capsys.readouterr().out.splitlines()]
    assert len(reports) == 2 and [r["norm"] for r in reports] == ["X_T", "Y_T"]
    assert all(r["value"] > 0 and r["beta"] == 0.5 for r in reports)


def test_stability(capsys):
    assert main(["stability", "Disc2D", "--n", "32", "--kmax", "3", "--show", "3"]) == EXIT_OK
    d = json.loads(capsys.readouterr().out)
    assert d["strictly_stable"] and len(d["modes"]) == 3
    assert d["min_eigenvalue"] == pytest.approx(48.0, rel=1e-8)
    assert len(d["translations"]) == 2
    assert main(["stability", "Sphere"]) == EXIT_USAGE


def test_verify_single_criterion(tmp_path, capsys):
    assert main(["verify-all", "--only", "1", "--output-dir", str(tmp_path)]) == EXIT_OK
    out = capsys.readouterr().out
    assert "PASS" in out and (tmp_path / "verify.ndjson").exists()

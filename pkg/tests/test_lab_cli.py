import json
import math
import subprocess
import sys

import numpy as np
import pytest

from kquant import (
    ACCEPTANCE,
    EXPERIMENTS,
    ExperimentConfig,
    KQuantError,
    Report,
    Series,
    Verdict,
    calibrate_twist_constant,
    emit_report,
    fit_power_law,
    report_from_json,
    run_experiment,
)
from kquant.cli import main as cli_main
from kquant.reporting import CSV_HEADER


def test_fit_power_law_exact_synthetic():
    pairs = [(k, 5.0 / k) for k in (4, 8, 16, 32)]
    fit = fit_power_law(pairs)
    assert abs(fit.exponent - 1.0) <= 1e-6
    assert abs(fit.coefficient - 5.0) <= 1e-6
    assert fit.residual <= 1e-12


def test_fit_power_law_constant_series():
    fit = fit_power_law([(k, 0.7) for k in (2, 4, 8)])
    assert abs(fit.exponent) <= 1e-9


def test_fit_power_law_excludes_nonpositive():
    fit = fit_power_law([(2, 1.0), (4, 0.5), (8, -1.0), (16, 0.125)])
    assert fit.flag == "excluded=1"
    assert fit.exponent > 0


def test_fit_power_law_exact_floor_flag():
    fit = fit_power_law([(k, 1e-15) for k in (2, 4, 8)])
    assert fit.flag == "exact"


def test_fit_power_law_needs_three_points():
    with pytest.raises(KQuantError):
        fit_power_law([(2, 1.0), (4, 0.5)])


def test_config_validation():
    with pytest.raises(KQuantError):
        ExperimentConfig(experiment="nope")
    with pytest.raises(KQuantError):
        ExperimentConfig(experiment="bergman-expansion", k_list=(8, 8))
    with pytest.raises(KQuantError):
        ExperimentConfig(experiment="bergman-expansion", resolution=4)
    with pytest.raises(KQuantError):
        ExperimentConfig(experiment="bergman-expansion", group="torus")


def test_experiment_registry_complete():
    assert sorted(EXPERIMENTS) == [
        "almost-balanced",
        "bergman-expansion",
        "compare-LZ",
        "hessian-check",
        "i-concavity",
        "minimization",
        "path-independence",
        "psi-expansion",
        "quantize-E",
        "z-convexity",
    ]


def test_report_json_roundtrip(tmp_path):
    rep = Report(
        experiment="demo",
        series=[Series("s", [2, 4], [1.0, 0.5], fit_power_law([(2, 1.0), (4, 0.5), (8, 0.25)]))],
        verdicts=[Verdict("check", 0.5, 1.0, True)],
        environment={"resolution": 64},
        notes=["note"],
    )
    back = report_from_json(rep.to_json())
    assert back.to_json() == rep.to_json()


def test_emit_csv_header_and_svg_polylines(tmp_path):
    rep = Report(
        experiment="demo",
        series=[
            Series("a", [2, 4, 8], [1.0, 0.5, 0.25], None),
            Series("b", [2, 4, 8], [2.0, 1.0, 0.5], None),
        ],
        verdicts=[Verdict("check", 0.5, 1.0, True)],
    )
    paths = emit_report(rep, ["csv", "json", "svg"], tmp_path)
    csv_text = (tmp_path / "demo.csv").read_text()
    assert csv_text.splitlines()[0] == ",".join(CSV_HEADER)
    svg_text = (tmp_path / "demo.svg").read_text()
    assert svg_text.count("<polyline") == 2
    parsed = json.loads((tmp_path / "demo.json").read_text())
    assert parsed["experiment"] == "demo" and parsed["passed"] is True


def test_emit_report_unwritable_path(tmp_path):
    blocker = tmp_path / "blocker"
    blocker.write_text("x")
    rep = Report(experiment="demo")
    with pytest.raises(RuntimeError):
        emit_report(rep, ["json"], blocker / "sub")


def test_report_determinism():
    cfg = ExperimentConfig(
        experiment="bergman-expansion", k_list=(8, 16, 32), resolution=128, seed=5
    )
    a = run_experiment(cfg).to_json()
    b = run_experiment(cfg).to_json()
    assert a == b


def test_environment_echo():
    cfg = ExperimentConfig(experiment="bergman-expansion", k_list=(4, 8, 16), resolution=128)
    rep = run_experiment(cfg)
    env = rep.environment
    assert env["volume"] == 1.0 and env["mean_scalar"] == 2.0
    assert env["resolution"] == 128
    assert env["twist_rate_constant"] == pytest.approx(-math.pi / 2.0)


def test_exact_series_flagged():
    # the flat potential gives the exact density of states at every degree
    cfg = ExperimentConfig(
        experiment="bergman-expansion",
        k_list=(4, 8, 16),
        resolution=128,
        potential=(0.0,),
    )
    rep = run_experiment(cfg)
    assert rep.series[0].fit.flag == "exact"
    assert rep.passed


def test_calibrated_rate_constant(radial, bump):
    from kquant import rotation_field

    c0 = calibrate_twist_constant(radial, bump, rotation_field(1.0), k=48)
    assert abs(c0 - (-math.pi / 2.0)) <= 0.05


def test_cli_list(capsys):
    assert cli_main(["list"]) == 0
    out = capsys.readouterr().out.split()
    assert "bergman-expansion" in out and len(out) == 10


def test_cli_run_and_exit_codes(tmp_path, capsys):
    rc = cli_main(
        [
            "run",
            "--experiment",
            "bergman-expansion",
            "--resolution",
            "128",
            "--out",
            str(tmp_path),
            "--format",
            "csv,json",
        ]
    )
    assert rc == 0
    assert (tmp_path / "bergman-expansion.json").exists()
    assert (tmp_path / "bergman-expansion.csv").exists()
    out = capsys.readouterr().out
    assert out.startswith("PASS bergman-expansion")


def test_cli_config_file_and_overrides(tmp_path, capsys):
    cfg = tmp_path / "lab.cfg"
    cfg.write_text(
        "# demo config\n"
        "k_list = 8 16 32\n"
        "resolution = 128\n"
        "seed = 9\n"
        "potential = 0.05 -0.07\n"
        "tol.bergman_fit_p = 5.0\n"  # unreachable: forces a failing verdict
    )
    rc = cli_main(
        ["run", "--experiment", "bergman-expansion", "--config", str(cfg), "--out", str(tmp_path)]
    )
    assert rc == 1
    assert "FAIL" in capsys.readouterr().out


def test_cli_invalid_config_line(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("resolution 128\n")
    with pytest.raises(KQuantError, match="bad.cfg:1"):
        cli_main(["run", "--experiment", "bergman-expansion", "--config", str(cfg)])


def test_console_script_installed():
    proc = subprocess.run(
        [sys.executable, "-m", "kquant.cli", "list"], capture_output=True, text=True
    )
    assert proc.returncode == 0
    assert "z-convexity" in proc.stdout


def test_experiment_abort_becomes_failing_verdict():
    cfg = ExperimentConfig(
        experiment="bergman-expansion",
        k_list=(4, 8, 16),
        resolution=128,
        potential=(2.5,),  # not a Kahler potential
    )
    rep = run_experiment(cfg)
    assert not rep.passed
    assert any("aborted" in n for n in rep.notes)

import json
import subprocess
import sys

import pytest
import yaml

from monodomain.cli import EXIT_INSTABILITY, EXIT_IO, EXIT_OK, EXIT_VALIDATION, main

from test_config import with_


def write(tmp_path, data, name="cfg.yaml"):
    p = tmp_path / name
    p.write_text(yaml.safe_dump(data))
    return p


def test_run_artifacts(tmp_path, capsys):
    cfg = write(tmp_path, with_(apd_probe="a", output={"snapshot_interval": 10.0}))
    out = tmp_path / "out"
    assert main(["run", "--config", str(cfg), "--output-dir", str(out)]) == EXIT_OK
    printed = json.loads(capsys.readouterr().out)
    assert printed["markers"]["cv_cm_per_ms"] > 0
    for name in ("trace_a.csv", "trace_b.csv", "lat.csv", "apd90.csv", "lat.vtk", "apd90.vtk",
                 "report.json", "config.yaml", "snapshot_0000.vtk", "snapshot_0002.vtk"):
        assert (out / name).exists(), name
    rep = json.loads((out / "report.json").read_text())
    t = rep["timing"]
    for key in ("total_s", "reaction_s", "diffusion_s", "assembly_s", "output_s"):
        assert key in t
    assert t["total_s"] >= 0.95 * (t["reaction_s"] + t["diffusion_s"])
    assert rep["config"]["name"] == "tiny" and "environment" in rep and "k_histogram" in rep


def test_rerun_is_byte_identical(tmp_path):
    cfg = write(tmp_path, with_())
    for d in ("r1", "r2"):
        assert main(["run", "--config", str(cfg), "--output-dir", str(tmp_path / d)]) == EXIT_OK
    for name in ("trace_a.csv", "trace_b.csv", "lat.csv", "apd90.csv"):
        assert (tmp_path / "r1" / name).read_bytes() == (tmp_path / "r2" / name).read_bytes()


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("MONODOMAIN_OUTPUT_DIR", str(tmp_path / "env"))
    assert main(["run", "--config", str(write(tmp_path, with_()))]) == EXIT_OK
    assert (tmp_path / "env" / "tiny" / "report.json").exists()


def test_scheme_override(tmp_path, capsys):
    cfg = write(tmp_path, with_())
    assert main(["run", "--config", str(cfg), "--scheme", "OST", "--dt", "0.05",
                 "--output-dir", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out)["dt_effective_ms"] == 0.05


def test_validation_exit_code(tmp_path, capsys):
    cfg = write(tmp_path, with_(models={"myocyte-epi": "nope"}))
    assert main(["run", "--config", str(cfg)]) == EXIT_VALIDATION
    assert "models" in capsys.readouterr().err
    assert main(["run"]) == EXIT_VALIDATION
    assert main(["frobnicate"]) == EXIT_VALIDATION


def test_io_exit_code(tmp_path):
    assert main(["run", "--config", str(tmp_path / "missing.yaml")]) == EXIT_IO
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    cfg = write(tmp_path, with_())
    assert main(["run", "--config", str(cfg), "--output-dir", str(blocker / "sub")]) == EXIT_IO


def test_instability_exit_code(tmp_path, capsys):
    data = with_(models={"myocyte-epi": "ohara_rudy_epi"}, stimuli=[],
                 scheme={"scheme": "DAETI", "dt": 0.1, "T": 30.0})
    assert main(["run", "--config", str(write(tmp_path, data)), "--output-dir", str(tmp_path / "o")]) \
        == EXIT_INSTABILITY
    assert "node" in capsys.readouterr().err


def test_compare_self_is_zero(tmp_path, capsys):
    cfg = write(tmp_path, with_(apd_probe="a", scheme={"scheme": "DAETI", "dt": 0.1, "T": 300.0}))
    assert main(["compare", "--config", str(cfg), "--schemes", "DAETI", "DAETI",
                 "--output-dir", str(tmp_path / "c")]) == EXIT_OK
    rows = json.loads(capsys.readouterr().out)["schemes"]
    assert set(rows) == {"DAETI", "DAETI#2"}
    second = rows["DAETI#2"]
    assert all(v == 0.0 for v in second["max_abs_dV_mV"].values())
    assert second["nrmse_lat"] == 0.0
    assert (tmp_path / "c" / "compare_report.json").exists()


def test_dts_single_row(tmp_path, capsys):
    data = with_(dts={"spacings_um": [500]})
    assert main(["dts", "--config", str(write(tmp_path, data)), "--spectral"]) == EXIT_OK
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 and "critical_step_ms" in lines[0]


def test_threshold_command(tmp_path, capsys):
    data = with_(mesh={"Lx": 1.1, "Ly": 0.05, "h": 0.025},
                 probes=[{"name": "a", "point": [0.5, 0.0]}, {"name": "b", "point": [1.0, 0.0]}],
                 threshold={"probe": "b", "initial_amplitude": 20.0, "window": 100.0})
    assert main(["threshold", "--config", str(write(tmp_path, data))]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["twice_threshold_mV_per_ms"] == 2 * out["threshold_mV_per_ms"] > 0


def test_cell_command(tmp_path, capsys):
    trace = tmp_path / "beat.csv"
    assert main(["cell", "--model", "aliev_panfilov", "--dt0", "--pace", "2", "--trace", str(trace),
                 "--duration", "50"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["beats"] == 2 and out["dt0_estimate_ms"] > 0 and trace.exists()


def test_oracle_subcommands(capsys):
    assert main(["oracle", "linear-convergence"]) == EXIT_OK
    assert 1.9 <= json.loads(capsys.readouterr().out)["order"] <= 2.1
    assert main(["oracle", "spectral"]) == EXIT_OK
    sb = json.loads(capsys.readouterr().out)
    assert sb["critical_step_ms"] >= sb["dt_s_over_safety_ms"]


def test_oracle_hidden_from_help(capsys):
    assert main(["--help"]) == EXIT_OK
    text = capsys.readouterr().out
    assert "oracle" not in text and "threshold" in text


def test_console_script(tmp_path):
    res = subprocess.run([sys.executable, "-m", "monodomain.cli", "dts", "--config", "sec3_1_planar"],
                         capture_output=True, text=True)
    assert res.returncode == EXIT_VALIDATION
    assert "dts" in res.stderr

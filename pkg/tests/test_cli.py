import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import SMALL_ARGS
from vibtpa import dataio
from vibtpa.cli import main
from vibtpa.synth_model import ground_truth, save_scenario


@pytest.fixture(scope="module")
def sim_dir(small_scenario, tmp_path_factory):
    d = tmp_path_factory.mktemp("cli")
    save_scenario(small_scenario, d / "scenario.json")
    assert main(["simulate", "--out", str(d / "data"), "--scenario", str(d / "scenario.json")]) == 0
    return d / "data"


def run(*args):
    return main([str(a) for a in args])


def test_simulate_outputs(sim_dir, small_scenario):
    assert (sim_dir / "manifest.json").is_file()
    assert (sim_dir / "scenario.json").is_file()
    truth = sorted(p.name for p in (sim_dir / "truth").iterdir())
    assert len(truth) == 27 + 3 + 1
    r, y, v = dataio.read_rpm_series(sim_dir / "truth" / "total_o4.csv")
    np.testing.assert_allclose(y, ground_truth(small_scenario, r).target(4.0), rtol=1e-12)


def test_simulate_overrides(tmp_path, capsys):
    out = tmp_path / "d"
    code = run("simulate", "--out", out, "--duration", 1, "--sample-rate", 2048, "--tacho", "pulse",
               "--stiff", "LH", "--nonlinear", 100, "--no-impacts", "--seed", 7)
    assert code == 0
    assert "manifest.json" in capsys.readouterr().out
    sc = json.loads((out / "scenario.json").read_text())
    assert sc["duration"] == 1.0 and sc["seed"] == 7 and sc["nonlinearity"] == 100.0
    assert sc["mounts"][1]["stiffness"]["X"] > sc["mounts"][2]["stiffness"]["X"]
    m = json.loads((out / "manifest.json").read_text())
    tacho = next(c for c in m["channels"] if c["id"] == "tacho")
    assert tacho["unit"] == "pulse" and tacho["pulses_per_rev"] == 1
    assert [r["kind"] for r in m["recordings"]] == ["runup"]


@pytest.mark.parametrize("cmd,pattern,count", [
    ("frf", "body_frf_*.csv", 9),
    ("apparent-mass", "apparent_mass_*.csv", 9),
    ("transmissibility", "T_*.csv", 27),
])
def test_chain_commands(sim_dir, tmp_path, cmd, pattern, count):
    assert run(cmd, sim_dir / "manifest.json", "--out", tmp_path, *SMALL_ARGS) == 0
    assert len(list(tmp_path.glob(pattern))) == count


def test_single_path(sim_dir, tmp_path):
    assert run("frf", sim_dir / "manifest.json", "--out", tmp_path, "--path", "LH-Z", *SMALL_ARGS) == 0
    assert [p.name for p in tmp_path.iterdir()] == ["body_frf_LH-Z.csv"]
    spec, coh = dataio.read_spectrum(tmp_path / "body_frf_LH-Z.csv")
    assert spec.freqs[-1] == 300.0 and coh is not None


def test_rank(sim_dir, tmp_path, capsys):
    code = run("rank", sim_dir / "manifest.json", "--out", tmp_path, "--group-by", "path",
               "--rpm-range", "1200,2800", *SMALL_ARGS)
    assert code == 0
    text = capsys.readouterr().out
    assert "ranking by path over 1200-2800 rpm" in text
    rank = json.loads((tmp_path / "ranking.json").read_text())
    assert rank["by_path"]["rpm_range"] == [1200.0, 2800.0]
    assert len(rank["by_path"]["entries"]) == 9


def test_stiffness_units(sim_dir, tmp_path):
    assert run("stiffness", sim_dir / "manifest.json", "--out", tmp_path / "kg", *SMALL_ARGS) == 0
    assert run("stiffness", sim_dir / "manifest.json", "--out", tmp_path / "nm", "--omega2",
               *SMALL_ARGS) == 0
    a, _ = dataio.read_spectrum(tmp_path / "kg" / "stiffness" / "K_LH-X_o2.csv")
    b, _ = dataio.read_spectrum(tmp_path / "nm" / "stiffness" / "K_LH-X_o2.csv")
    v = a.valid
    np.testing.assert_allclose(np.abs(b.values[v]), np.abs(a.values[v]) * (2 * np.pi * a.freqs[v]) ** 2,
                               rtol=1e-12)


def test_synthesize_and_pipeline(sim_dir, tmp_path, capsys):
    assert run("synthesize", sim_dir / "manifest.json", "--out", tmp_path / "s", *SMALL_ARGS) == 0
    assert "max level error" in capsys.readouterr().out
    assert (tmp_path / "s" / "levels_by_mount.csv").is_file()
    assert run("pipeline", sim_dir / "manifest.json", "--out", tmp_path / "p", *SMALL_ARGS) == 0
    for sub in ("frf", "transmissibility", "contributions", "stiffness"):
        assert (tmp_path / "p" / sub).is_dir()
    assert (tmp_path / "p" / "ranking.json").is_file()


# ---------------------------------------------------------------------------
# exit codes
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("argv", [
    ["pipeline", "{tmp}/missing.json", "--out", "{tmp}/o"],
    ["pipeline", "{data}/manifest.json", "--out", "{tmp}/o", "--orders", "2,60"],
    ["frf", "{data}/manifest.json", "--out", "{tmp}/o", "--path", "RH-W"],
    ["pipeline", "{data}/manifest.json", "--out", "{tmp}/o", "--coh-threshold", "2"],
    ["pipeline", "{data}/manifest.json", "--out", "{tmp}/o", "--rpm-range", "3000,1000"],
    ["pipeline", "{data}/manifest.json", "--out", "{tmp}/o", "--orders", "two"],
    ["bogus"],
    [],
])
def test_input_errors_exit_1(sim_dir, tmp_path, argv):
    argv = [a.format(tmp=tmp_path, data=sim_dir) for a in argv]
    assert main(argv) == 1


def test_computation_error_exit_2(sim_dir, tmp_path, capsys):
    # 0.1 Hz resolution needs 10 s segments; impact records are 6 s long
    code = run("frf", sim_dir / "manifest.json", "--out", tmp_path, "--df", "0.1", "--fmax", "300")
    assert code == 2
    assert "computation error" in capsys.readouterr().err


def test_help_exits_0(capsys):
    assert main(["--help"]) == 0
    assert "simulate" in capsys.readouterr().out


def test_module_entry_point(sim_dir, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "vibtpa", "rank", str(sim_dir / "manifest.json"),
                           "--out", str(tmp_path), *SMALL_ARGS], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert "1. " in proc.stdout
    proc = subprocess.run([sys.executable, "-m", "vibtpa", "rank", str(tmp_path / "none.json"),
                           "--out", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 1 and "input error" in proc.stderr

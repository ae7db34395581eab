import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from odfc import alpha_from_eps, eps_from_alpha, make_system, params_from_alpha
from odfc.cli import emit_trajectory, main, read_trajectory_csv
from odfc.integrator import SimConfig, simulate


def run_cli(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


SIM = ["simulate", "--method", "velocity", "--plant", "linear", "--lambda", "2", "--tau", "0.2",
       "--alpha", "-0.4", "--x0", "0.5", "--periods", "10"]


def test_simulate_csv(capsys, tmp_path):
    out = tmp_path / "traj.csv"
    code, stdout, _ = run_cli(capsys, *SIM, "--out", str(out))
    assert code == 0
    rows = read_csv(out)
    assert list(rows[0]) == ["t", "x", "u", "segment_active"]
    assert float(rows[0]["t"]) == 0 and float(rows[0]["x"]) == 0.5 and float(rows[0]["u"]) == 0
    row = next(r for r in rows if abs(float(r["t"]) - 0.4) < 1e-12)
    assert float(row["x"]) == pytest.approx(-0.2, abs=1e-5)
    echo = json.loads(stdout)
    assert echo["eps"] == eps_from_alpha("velocity", 2.0, -0.4, 0.2)


def test_simulate_stdout(capsys):
    code, stdout, _ = run_cli(capsys, *SIM[:-2], "--periods", "1", "--steps-per-tau", "16")
    assert code == 0
    lines = stdout.strip().splitlines()
    assert lines[0] == "t,x,u,segment_active"
    assert len(lines) == 1 + 2 * 16 + 1


def test_outputs_byte_identical(capsys, tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    run_cli(capsys, *SIM, "--plant", "sinsq", "--out", str(a))
    run_cli(capsys, *SIM, "--plant", "sinsq", "--out", str(b))
    assert a.read_bytes() == b.read_bytes()


def test_csv_round_trip(tmp_path):
    spec = make_system("cubic_plus", 0.0, 2.0)
    tr = simulate(spec, params_from_alpha("states", 2.0, 0.3, 0.2), SimConfig(0.3, 3, 32))
    path = tmp_path / "t.csv"
    emit_trajectory(tr, path, "csv")
    back = read_trajectory_csv(path)
    assert back["t"].tobytes() == tr.times.tobytes()
    assert back["x"].tobytes() == tr.states.tobytes()
    assert back["u"].tobytes() == tr.control.tobytes()
    assert np.array_equal(back["segment_active"], tr.segment_active.astype(int))


def test_json_trajectory(tmp_path, capsys):
    path = tmp_path / "t.json"
    code, _, _ = run_cli(capsys, *SIM, "--format", "json", "--out", str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    meta = doc["metadata"]
    assert set(meta) == {"method", "lambda", "tau", "eps", "alpha", "N", "plant", "x0"}
    assert meta["N"] == 256 and meta["alpha"] == -0.4
    assert len(doc["t"]) == len(doc["x"]) == len(doc["u"]) == len(doc["segment_active"])


def test_deadbeat_rows(capsys, tmp_path):
    out = tmp_path / "d.csv"
    run_cli(capsys, "simulate", "--method", "velocity", "--tau", "0.2", "--alpha", "0", "--x0", "0.5",
            "--periods", "4", "--out", str(out))
    rows = read_csv(out)
    late = [abs(float(r["x"])) for r in rows if float(r["t"]) >= 0.4 - 1e-12]
    assert max(late) < 1e-6


def test_design_states(capsys):
    code, out, _ = run_cli(capsys, "design", "--method", "states", "--lambda", "2", "--tau", "0.2", "--alpha", "0")
    assert code == 0
    d = json.loads(out)
    assert d["eps"] == pytest.approx(22.6253, abs=1e-4)
    assert d["interval"]["lo"] == pytest.approx(15.8108, abs=1e-3)
    assert d["interval"]["hi"] == pytest.approx(29.4400, abs=1e-3)
    assert d["beta"] == "-inf"
    assert "tau_star" in d


@pytest.mark.parametrize("method", ["velocity", "states"])
def test_echo_consistency(capsys, method):
    _, out, _ = run_cli(capsys, "design", "--method", method, "--lambda", "1.3", "--tau", "0.35", "--alpha", "0.45")
    d = json.loads(out)
    assert abs(alpha_from_eps(method, 1.3, d["eps"], 0.35) - 0.45) < 1e-12
    _, out, _ = run_cli(capsys, "design", "--method", method, "--lambda", "1.3", "--tau", "0.35", "--eps", str(d["eps"]))
    d2 = json.loads(out)
    assert abs(d2["alpha"] - 0.45) < 1e-12
    assert abs(eps_from_alpha(method, 1.3, d2["alpha"], 0.35) - d["eps"]) < 1e-12 * abs(d["eps"])


def test_region(capsys, tmp_path):
    out = tmp_path / "region.csv"
    code, stdout, _ = run_cli(capsys, "region", "--method", "velocity", "--lambda", "2", "--grid", "64x64",
                              "--mode", "both", "--out", str(out))
    assert code == 0
    summary = json.loads(stdout)
    assert summary["agreement"] >= 0.95
    rows = read_csv(out)
    assert len(rows) == 64 * 64
    assert list(rows[0]) == ["lambda_tau", "eps_norm", "analytic_stable", "empirical_stable", "analytic_alpha"]
    brows = read_csv(tmp_path / "region_boundary.csv")
    assert list(brows[0]) == ["lambda_tau", "eps_lo", "eps_hi"]
    lt = np.array([float(r["lambda_tau"]) for r in brows])
    assert np.allclose([float(r["eps_lo"]) for r in brows], -2 * np.cosh(lt) / lt, rtol=0, atol=1e-10)


def test_region_analytic_only(capsys, tmp_path):
    out = tmp_path / "r.csv"
    code, _, _ = run_cli(capsys, "region", "--method", "states", "--grid", "16x20", "--mode", "analytic",
                         "--out", str(out), "--boundary-out", str(tmp_path / "b.csv"))
    assert code == 0
    rows = read_csv(out)
    assert len(rows) == 16 * 20
    assert rows[0]["empirical_stable"] == ""


def test_taustar(capsys):
    code, out, _ = run_cli(capsys, "taustar", "--method", "velocity", "--lambda", "2", "--alpha", "0")
    d = json.loads(out)
    assert code == 0 and d["tau_star"] == pytest.approx(0.5, abs=1e-10)
    assert abs(d["residual"]) < 1e-10


def test_probe(capsys):
    code, out, _ = run_cli(capsys, "probe", "--method", "states", "--plant", "cubic_minus", "--tau", "0.2",
                           "--eps", "25.3512")
    d = json.loads(out)
    assert code == 0 and d["numeric_dP"] == pytest.approx(-0.4, abs=1e-4)


def test_rate_with_envelope(capsys, tmp_path):
    env = tmp_path / "env.csv"
    code, out, _ = run_cli(capsys, "rate", "--method", "velocity", "--tau", "0.2", "--alpha", "-0.4",
                           "--x0", "0.5", "--mu", "0", "--envelope-out", str(env))
    d = json.loads(out)
    assert code == 0 and d["envelope"]["holds"]
    assert d["rate"]["beta_hat"] == pytest.approx(-2.2907, rel=0.02)
    rows = read_csv(env)
    assert list(rows[0]) == ["t", "abs_dx", "upper", "lower"]
    assert all(float(r["abs_dx"]) <= float(r["upper"]) * (1 + 1e-12) for r in rows)


def test_counterexample(capsys, tmp_path):
    out = tmp_path / "ce.csv"
    code, stdout, _ = run_cli(capsys, "counterexample", "--lambda", "2", "--grid", "16x16", "--out", str(out))
    assert code == 0 and json.loads(stdout)["empirical_stable_cells"] == 0
    assert all(r["empirical_stable"] == "0" for r in read_csv(out))


@pytest.mark.parametrize("argv", [
    ["design", "--method", "velocity", "--tau", "0.2"],
    ["design", "--method", "velocity", "--tau", "0.2", "--alpha", "0", "--eps", "1"],
    ["design", "--method", "nope", "--tau", "0.2", "--alpha", "0"],
    ["design", "--method", "velocity", "--tau", "-0.2", "--alpha", "0"],
    ["simulate", "--method", "velocity", "--tau", "0.2", "--alpha", "0", "--steps-per-tau", "4"],
    ["simulate", "--method", "velocity", "--tau", "0.2", "--alpha", "0", "--plant", "poly:1,1"],
    ["region", "--method", "velocity", "--grid", "8x8"],
    ["region", "--method", "velocity", "--grid", "axb"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run_cli(capsys, *argv)
    assert code == 2
    rec = json.loads(err)
    assert rec["error"] == "usage" and rec["exit_code"] == 2


def test_divergence_exit_code(capsys, tmp_path):
    code, _, err = run_cli(capsys, "simulate", "--method", "velocity", "--tau", "0.2", "--eps", "5",
                           "--periods", "40", "--out", str(tmp_path / "x.csv"))
    assert code == 3
    assert json.loads(err)["error"] == "divergence"


def test_polynomial_plant(capsys, tmp_path):
    out = tmp_path / "p.csv"
    code, _, _ = run_cli(capsys, "simulate", "--method", "velocity", "--plant", "poly:-1,0,1", "--x-star", "1",
                         "--tau", "0.2", "--alpha", "-0.4", "--x0", "1.01", "--periods", "8", "--out", str(out))
    assert code == 0
    assert float(read_csv(out)[-1]["x"]) == pytest.approx(1.0, abs=1e-4)


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "odfc.cli", "taustar", "--method", "states", "--lambda", "1",
                          "--alpha", "0"], capture_output=True, text=True)
    assert res.returncode == 0
    assert json.loads(res.stdout)["residual"] < 1e-10


def test_figure_script_covers_every_figure(tmp_path):
    import importlib.util
    from pathlib import Path

    path = Path(__file__).parent.parent / "scripts" / "reproduce_figures.py"
    spec = importlib.util.spec_from_file_location("reproduce_figures", path)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    figs = {fig for fig, _ in mod.jobs(tmp_path)}
    assert figs == {f"fig{i:02d}" for i in range(1, 12)}
    assert mod.main(["--out", str(tmp_path), "--only", "fig05"]) == 0
    assert (tmp_path / "fig05_tau0.02.csv").exists()

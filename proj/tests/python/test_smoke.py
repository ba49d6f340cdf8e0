import csv
import json
import math
import os
import subprocess

import numpy as np
import pytest

import qsd


def test_synthesize_and_filter_agree():
    p = qsd.SimParams(master_seed=3)
    rec, traj = qsd.synthesize("plus_x", p, index=5)
    assert len(rec) == p.steps == 50
    assert traj.bloch.shape == (51, 3)
    again = qsd.filter("plus_x", rec, p)
    np.testing.assert_array_equal(again.bloch, traj.bloch)
    assert traj.scheme == "kraus"
    assert traj.min_eigenvalue > -1e-12


def test_euler_scheme_and_lindblad_limit():
    p = qsd.SimParams(eta=0.0, dt=0.01, horizon=2.0)
    rec, _ = qsd.synthesize("excited", p)
    traj = qsd.filter("excited", rec, p)
    exact = qsd.lindblad_solve("excited", p, 2.0)
    assert np.allclose(traj.bloch[-1], exact, atol=1e-12)
    euler = qsd.filter("excited", rec, p, scheme="euler")
    assert euler.scheme == "euler"
    assert np.allclose(euler.bloch[-1], exact, atol=1e-2)


def test_closed_forms():
    p = qsd.SimParams(gamma_phi=0.0)
    assert qsd.alpha_of((1.0, 0.0, 0.0)) == pytest.approx(1.0)
    assert qsd.alpha_of((0.0, 0.0, -1.0)) is None
    a = qsd.alpha_flow(1.0, p, 4.15)
    assert a == pytest.approx(0.24 + 0.76 * math.e)
    assert qsd.spheroid_residual((1.0, 0.0, 0.0), 1.0) == pytest.approx(0.0, abs=1e-15)
    assert qsd.xi_of((0.6, 0.0, 0.0)) == pytest.approx((0.6, 0.0))
    state = qsd.state_from_spheroid(1.0, (1.0, 0.0))
    assert state == pytest.approx((1.0, 0.0, 0.0))


def test_record_only_reconstruction_tracks_filter():
    p = qsd.SimParams(gamma_phi=0.0, dt=0.01, horizon=2.0)
    rec, traj = qsd.synthesize("plus_x", p)
    xi = qsd.xi_from_record((1.0, 0.0), rec, p, 2.0)
    alpha = qsd.alpha_flow(1.0, p, 2.0)
    rebuilt = np.array(qsd.state_from_spheroid(alpha, xi))
    assert np.linalg.norm(rebuilt - traj.bloch[-1]) < 1e-2


def test_record_constructor_validates_lengths():
    rec = qsd.Record(0.2, [0.1, 0.2], [0.0, -0.1])
    assert len(rec) == 2
    with pytest.raises((ValueError, qsd.ConfigError)):
        qsd.Record(0.2, [0.1], [0.0, 0.1])


def test_errors_map_to_python_exceptions():
    with pytest.raises(qsd.ConfigError):
        qsd.SimParams(eta=1.5).validate()
    with pytest.raises(qsd.InvalidState):
        qsd.alpha_of((1.0, 1.0, 1.0))
    p = qsd.SimParams()
    rec = qsd.Record(0.1, [0.0], [0.0])
    with pytest.raises(qsd.ConfigError):
        qsd.filter("plus_x", rec, p)


def test_record_files_round_trip(tmp_path):
    p = qsd.SimParams(master_seed=11)
    rec, _ = qsd.synthesize("plus_x", p, index=2)
    path = tmp_path / "r.csv"
    qsd.write_record_csv(str(path), rec)
    back = qsd.read_record(str(path))
    np.testing.assert_array_equal(back.dI, rec.dI)
    np.testing.assert_array_equal(back.dQ, rec.dQ)
    assert (back.seed, back.index) == (11, 2)
    path.write_text("# qsd-record v1, dt_us=0.2\nt_us,dI,dQ\n0,1,oops\n")
    with pytest.raises(qsd.ParseError, match=r"r\.csv:3"):
        qsd.read_record(str(path))


def test_estimate_eta_returns_interval():
    p = qsd.SimParams(master_seed=21)
    recs = [qsd.synthesize("plus_x", p, index=i)[0] for i in range(400)]
    res = qsd.estimate_eta("plus_x", recs, p, n=11)
    lo, hi = res["ci95"]
    assert lo <= res["eta_hat"] <= hi
    assert 0.0 < res["eta_hat"] < 0.7
    assert len(res["curve"]) == 11
    assert qsd.record_log_likelihood("plus_x", recs[0], p) == pytest.approx(
        qsd.record_log_likelihood("plus_x", recs[0], p)
    )


def test_version():
    assert qsd.__version__.count(".") == 2


# The plotting layer reads CLI outputs with nothing but csv/json. These tests
# pin the columns and keys it relies on.

CLI = os.environ.get("QSD_CLI")


def run_cli(*args):
    env = {k: v for k, v in os.environ.items() if k != "QSD_SEED"}
    return subprocess.run([CLI, *args], capture_output=True, text=True, env=env)


def read_commented_csv(path):
    with open(path, newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


@pytest.mark.skipif(CLI is None, reason="QSD_CLI not set")
def test_simulation_outputs_are_plot_ready(tmp_path):
    out = tmp_path / "sim"
    r = run_cli(
        "simulate", "-o", str(out),
        "--set", "ensemble_size=40",
        "--set", 'outputs=["records","trajectories","invariants","grid"]',
        "--set", "initial=excited",
    )
    assert r.returncode == 0, r.stderr

    rows = read_commented_csv(out / "records" / "record_0.csv")
    assert list(rows[0]) == ["t_us", "dI", "dQ"]
    assert len(rows) == 50

    traj = read_commented_csv(out / "trajectories" / "trajectory_3.csv")
    assert list(traj[0]) == ["t_us", "x", "y", "z", "S_L", "alpha", "xi_x", "xi_y"]
    assert float(traj[0]["z"]) == 1.0

    mean = read_commented_csv(out / "ensemble_mean.csv")
    assert list(mean[0]) == ["t_us", "mean_dI_over_dt", "stderr", "lindblad_model"]

    grid = json.loads((out / "grid.json").read_text())
    assert grid["cell_side"] == 0.04
    for layer in grid["layers"]:
        assert sum(c[3] for c in layer["cells"]) == 40
        assert layer["total"] == 40
        assert "alpha_flow" in layer
    cells = read_commented_csv(out / "grid.csv")
    assert list(cells[0]) == ["t_us", "ix", "iy", "iz", "count"]

    manifest = json.loads((out / "manifest.json").read_text())
    assert {f["path"] for f in manifest["files"]} >= {"grid.json", "grid.csv", "invariants.json"}


@pytest.mark.skipif(CLI is None, reason="QSD_CLI not set")
def test_tomography_and_likelihood_outputs_are_plot_ready(tmp_path):
    out = tmp_path / "val"
    r = run_cli(
        "validate", "-o", str(out),
        "--set", "ensemble_size=500",
        "--set", 'axes=["z"]',
        "--set", "thresholds.slope_tolerance=10",
        "--set", "thresholds.bin_fraction=0.01",
        "--set", "thresholds.total_mean_sigmas=100",
    )
    assert r.returncode == 0, r.stderr
    rep = json.loads((out / "tomography_z.json").read_text())
    assert rep["axis"] == "z"
    assert rep["total"] == 500
    for b in rep["bins"]:
        assert set(b) >= {"center", "half_width", "count", "mean_tomo", "stderr", "mean_predicted"}

    out = tmp_path / "lik"
    r = run_cli("estimate-eta", "-o", str(out), "--set", "ensemble_size=50", "--set", "eta_grid.n=5")
    assert r.returncode in (0, 1), r.stderr
    lik = json.loads((out / "likelihood.json").read_text())
    assert set(lik) >= {"eta_hat", "ci95", "boundary_warning", "curve"}
    assert len(lik["ci95"]) == 2

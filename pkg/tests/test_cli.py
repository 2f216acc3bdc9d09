import csv
import io
import json
import math
import shutil
import subprocess

import numpy as np
import pytest

from proxlab.cli import main


def run(capsys, *argv):
    code = main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, out, err


def write(path, obj):
    path.write_text(json.dumps(obj))
    return path


def test_angles(tmp_path, capsys):
    (tmp_path / "a.txt").write_text("1 0 0\n")
    (tmp_path / "b.txt").write_text("0.5 0.8660254037844386 0\n")
    code, out, _ = run(capsys, "angles", tmp_path / "a.txt", tmp_path / "b.txt")
    assert code == 0
    rep = json.loads(out)
    assert rep["cos_friedrichs"] == pytest.approx(0.5, abs=1e-12)


def test_angles_dimension_mismatch(tmp_path, capsys):
    (tmp_path / "a.txt").write_text("1 0 0\n")
    (tmp_path / "b.txt").write_text("1 0\n")
    code, _, err = run(capsys, "angles", tmp_path / "a.txt", tmp_path / "b.txt")
    assert code == 2 and "ambient" in err


def dr_config(tmp_path):
    return write(tmp_path / "cfg.json", {
        "problem": {"generator": "affine_constrained", "regularizer": "l1", "seed": 0},
        "schedule": {"gamma": 1.0},
        "z0": [0.0] * 32,
        "max_iter": 300,
    })


def test_run_to_stdout_is_deterministic(tmp_path, capsys):
    cfg = dr_config(tmp_path)
    code, first, _ = run(capsys, "run", cfg)
    _, second, _ = run(capsys, "run", cfg)
    assert code == 0 and first == second
    rows = list(csv.reader(io.StringIO(first)))
    assert rows[0] == ["k", "gamma_k", "lambda_k", "dist_z", "dist_x", "dist_v", "fp_J", "fp_G", "residual"]
    assert len(rows) == 301
    assert float(rows[-1][3]) < float(rows[1][3])


def test_run_directory_then_rate(tmp_path, capsys):
    cfg = dr_config(tmp_path)
    code, out, _ = run(capsys, "run", cfg, "--out", tmp_path / "run")
    assert code == 0 and out.strip().endswith("trace.csv")
    code, out, _ = run(capsys, "rate", tmp_path / "run")
    assert code == 0
    rep = json.loads(out)
    assert rep["classification"] == "OPTIMAL"
    assert rep["predicted_rho"] == pytest.approx(rep["cos_friedrichs"], abs=1e-8)
    assert rep["nd_margins"]["J"]["margin"] > 0
    assert rep["lambda"] == 1.0


def test_run_with_explicit_functions_and_reference_file(tmp_path, capsys):
    # two lines through the origin at 60 degrees; the fixed point is the origin
    write(tmp_path / "ref.json", {"z": [0.0, 0.0], "gamma": 1.0})
    cfg = write(tmp_path / "cfg.json", {
        "problem": {
            "G": {"kind": "affine_indicator", "L": [[0.0, 1.0]], "b": [0.0]},
            "J": {"kind": "affine_indicator", "L": [[-math.sqrt(3) / 2, 0.5]], "b": [0.0]},
        },
        "z0": [1.0, 2.0],
        "max_iter": 40,
        "reference": "ref.json",
    })
    code, out, _ = run(capsys, "run", cfg)
    assert code == 0
    dist = np.array([float(r[3]) for r in list(csv.reader(io.StringIO(out)))[1:]])
    assert np.allclose(dist[11:] / dist[10:-1], 0.5, atol=1e-9)


def test_admm_stdout_and_out(tmp_path, capsys):
    rng = np.random.default_rng(0)
    L = rng.standard_normal((8, 4))
    np.savetxt(tmp_path / "L.txt", L)
    cfg = write(tmp_path / "admm.json", {
        "L": "L.txt",
        "G_solver": {"kind": "quadratic", "A": rng.standard_normal((6, 4)).tolist(), "b": rng.standard_normal(6).tolist()},
        "J": {"kind": "l1_norm", "dim": 8},
        "gamma": 1.0,
        "init": {"seed": 2},
        "max_iter": 60,
    })
    code, out, _ = run(capsys, "admm", cfg)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["k", "dist_u", "dist_v", "dist_y", "dist_w", "fp_G", "fp_J", "primal_residual"]
    code, out, _ = run(capsys, "admm", cfg, "--out", tmp_path / "o")
    assert code == 0
    with open(tmp_path / "o" / "admm.csv", newline="") as fh:
        assert list(csv.reader(fh)) == rows


def test_experiment_subcommand_is_byte_identical(tmp_path, capsys):
    cfg = write(tmp_path / "c.json", {"grid": 4, "gammas": [0.25, 5.0]})
    for d in ("a", "b"):
        code, out, _ = run(capsys, "experiment", "finite_convergence_map", "--config", cfg, "--out", tmp_path / d)
        assert code == 0
        assert json.loads(out)["per_gamma"]["0.25"]["all_finite"]
    assert (tmp_path / "a" / "iterations.csv").read_bytes() == (tmp_path / "b" / "iterations.csv").read_bytes()


def test_errors_exit_with_code_two(tmp_path, capsys):
    code, _, err = run(capsys, "rate", tmp_path / "missing")
    assert code == 2 and err.startswith("proxlab: error:")
    bad = write(tmp_path / "bad.json", {"problem": {"generator": "nope"}, "z0": [0.0]})
    code, _, err = run(capsys, "run", bad)
    assert code == 2 and "generator" in err


def test_unknown_subcommand_is_rejected(capsys):
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 2


@pytest.mark.skipif(shutil.which("proxlab") is None, reason="console script not installed")
def test_console_script(tmp_path):
    (tmp_path / "a.txt").write_text("1 0\n")
    (tmp_path / "b.txt").write_text("0 1\n")
    res = subprocess.run(["proxlab", "angles", tmp_path / "a.txt", tmp_path / "b.txt"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["angles"] == [pytest.approx(math.pi / 2)]

import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest

from conftest import two_gaussians
from hrvfl.cli import main
from hrvfl.data import Dataset, save_csv
from hrvfl.model import load_model


@pytest.fixture
def toy_csv(tmp_path):
    X, y = two_gaussians(0, n=80, shift=3.0)
    p = tmp_path / "toy.csv"
    save_csv(Dataset(X, y, "toy", ("no", "yes")), p)
    return p


def _json_line(text):
    return json.loads(text.strip().splitlines()[-1])


def test_train_then_eval(toy_csv, tmp_path, capsys):
    model_path = tmp_path / "m.json"
    assert main(["train", "--data", str(toy_csv), "--header", "--hidden", "20", "--out", str(model_path)]) == 0
    out = _json_line(capsys.readouterr().out)
    assert out["train_accuracy"] > 0.9
    assert out["report"]["reason"] in ("tolerance", "max_iters")
    model = load_model(model_path)
    assert model.classes == ("no", "yes") and model.scaler is not None

    assert main(["eval", "--data", str(toy_csv), "--header", "--model", str(model_path)]) == 0
    ev = _json_line(capsys.readouterr().out)
    assert ev["n"] == 80 and ev["accuracy"] == out["train_accuracy"]


@pytest.mark.parametrize("family", ["rvfl", "rvfl_wodl"])
def test_train_ridge_families(family, toy_csv, tmp_path, capsys):
    path = tmp_path / f"{family}.json"
    assert main(["train", "--data", str(toy_csv), "--header", "--model", family, "--hidden", "10",
                 "--out", str(path)]) == 0
    assert _json_line(capsys.readouterr().out)["report"] is None
    assert load_model(path).config.direct_links == (family == "rvfl")


def test_train_with_step_scaling(toy_csv, tmp_path, capsys):
    args = ["train", "--data", str(toy_csv), "--header", "--hidden", "10", "--C", "100", "--lr", "1",
            "--decay", "0", "--step-scaling", "--warm-start", "--out", str(tmp_path / "s.json")]
    assert main(args) == 0
    assert load_model(tmp_path / "s.json").config.step_scaling


def test_bench_subcommand(toy_csv, tmp_path, capsys):
    cfg = {"datasets": [{"name": "toy", "path": str(toy_csv), "header": True}],
           "models": ["hrvfl", "rvfl"],
           "grid": {"C": [1.0], "lam": [1.0], "a": [1.0], "eps": [0.0], "hidden": [10]},
           "nag": {"max_iters": 100}}
    (tmp_path / "exp.json").write_text(json.dumps(cfg))
    assert main(["bench", "--config", str(tmp_path / "exp.json"), "--out", str(tmp_path / "res")]) == 0
    text = capsys.readouterr().out
    assert "Avg. Rank" in text
    summary = _json_line(text)
    assert summary["rows"] == 2 and summary["errors"] == 0 and len(summary["best"]) == 2
    assert (tmp_path / "res" / "results.jsonl").exists()


def test_noise_sweep_subcommand(toy_csv, tmp_path, capsys):
    args = ["noise-sweep", "--data", str(toy_csv), "--header", "--rates", "0.1,0.3", "--models", "rvfl",
            "--C-grid", "0.1,1", "--hidden-grid", "10", "--out", str(tmp_path / "sw")]
    assert main(args) == 0
    summary = _json_line(capsys.readouterr().out)
    assert summary["rows"] == 4
    assert sorted(b["noise_rate"] for b in summary["best"]) == [0.1, 0.3]
    table = (tmp_path / "sw" / "table.txt").read_text()
    assert "10%" in table and "30%" in table


def test_loss_curve_shapes(tmp_path):
    out = tmp_path / "curve.csv"
    assert main(["loss-curve", "--lam", "2", "--a", "1", "--eps", "0.5", "--num", "101", "--out", str(out)]) == 0
    with open(out) as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 101 and list(rows[0]) == ["x", "loss", "grad"]
    x = np.array([float(r["x"]) for r in rows])
    L = np.array([float(r["loss"]) for r in rows])
    g = np.array([float(r["grad"]) for r in rows])
    assert np.all(L[np.abs(x) <= 0.5] == 0) and np.all(g[np.abs(x) <= 0.5] == 0)
    assert np.all(L[np.abs(x) > 0.5] > 0) and np.all(L < 2)
    # grid points are mirror images only up to rounding
    np.testing.assert_allclose(L, L[::-1], atol=1e-13)


def test_loss_curve_to_stdout(capsys):
    assert main(["loss-curve", "--num", "3"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "x,loss,grad" and len(lines) == 4


def test_error_record_and_exit_code(tmp_path, capsys):
    assert main(["eval", "--data", str(tmp_path / "missing.csv"), "--model", str(tmp_path / "m.json")]) == 1
    err = json.loads(capsys.readouterr().err)
    assert set(err) == {"error", "message"}


def test_bad_loss_parameters_reported(capsys):
    assert main(["loss-curve", "--lam", "-1"]) == 1
    assert json.loads(capsys.readouterr().err)["error"] == "ConfigError"


def test_label_set_mismatch(toy_csv, tmp_path, capsys):
    main(["train", "--data", str(toy_csv), "--header", "--model", "rvfl", "--hidden", "5",
          "--out", str(tmp_path / "m.json")])
    other = tmp_path / "other.csv"
    X, y = two_gaussians(1, n=20)
    save_csv(Dataset(X, y, "o", ("cat", "dog")), other)
    assert main(["eval", "--data", str(other), "--header", "--model", str(tmp_path / "m.json")]) == 1
    assert "label sets differ" in json.loads(capsys.readouterr().err.strip().splitlines()[-1])["message"]


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "hrvfl", "loss-curve", "--num", "2"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("x,loss,grad")
    proc = subprocess.run([sys.executable, "-m", "hrvfl", "eval", "--data", str(tmp_path / "no.csv"),
                           "--model", "x"], capture_output=True, text=True)
    assert proc.returncode != 0
    assert "error" in json.loads(proc.stderr.strip().splitlines()[-1])

import csv
import json

import numpy as np
import pytest

from sospderand import __version__
from sospderand.cli import ConfigError, main, parse_config_text, resolve_config
from sospderand.maxcut import random_graph, write_graph


def run(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path)])


def read_csv(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_parse_config_text():
    cfg = parse_config_text("# header\nT = 5  # trailing\n\nlam=0.1\n")
    assert cfg == {"T": "5", "lam": "0.1"}
    with pytest.raises(ConfigError):
        parse_config_text("no equals sign")


def test_resolve_rejects_unknown_and_bad_values():
    with pytest.raises(ConfigError):
        resolve_config("nn", {"bogus": "1"}, {})
    with pytest.raises(ConfigError):
        resolve_config("nn", {}, {"h": "many"})
    cfg = resolve_config("nn", {"h": "10"}, {"h": "20"})
    assert cfg["h"] == 20 and cfg["out_dir"] == "runs/nn"


def test_toy1d(tmp_path):
    code = run(tmp_path, "toy1d", "--set", "lambdas=1e-2,1", "--set", "w_points=101", "--set", "b_points=41")
    assert code == 0
    rows = read_csv(tmp_path / "toy1d.csv")
    assert list(rows[0]) == ["lambda", "w_star", "b_star", "f_star", "bias_trained"]
    frozen = [float(r["w_star"]) for r in rows if r["bias_trained"] == "0"]
    trained = [r for r in rows if r["bias_trained"] == "1"]
    assert frozen[0] > frozen[1]
    assert all(abs(float(r["w_star"])) < 1e-3 and abs(float(r["b_star"]) - 1) < 1e-3 for r in trained)


def test_toy1d_empty_grid_is_config_error(tmp_path):
    assert run(tmp_path, "toy1d", "--set", "lambdas=") == 2


def test_nn_and_manifest_rerun(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    args = ["nn", "--seed", "3", "--set", "h=10", "--set", "T=60", "--set", "samples=200"]
    assert main(args + ["--out", str(a)]) == 0
    manifest = (a / "manifest.txt").read_text()
    assert "# command: nn" in manifest and f"# version: {__version__}" in manifest
    assert "seed = 3" in manifest and "h = 10" in manifest
    assert main(["nn", "--config", str(a / "manifest.txt"), "--out", str(b)]) == 0
    assert (a / "perp_trajectory.csv").read_bytes() == (b / "perp_trajectory.csv").read_bytes()
    summary = json.loads((a / "summary.json").read_text())
    assert summary["max_decoupling_gap"] <= 1e-10
    assert len(read_csv(a / "perp_trajectory.csv")) == 61


def test_nn_zero_width_is_config_error(tmp_path):
    assert run(tmp_path, "nn", "--set", "h=0") == 2


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_nn_divergence_is_numeric_abort(tmp_path):
    code = run(tmp_path, "nn", "--set", "h=5", "--set", "T=400", "--set", "samples=50", "--set", "eta=1e6")
    assert code == 3


def test_unknown_key_is_config_error(tmp_path):
    assert run(tmp_path, "maxcut", "--set", "colour=blue") == 2
    assert run(tmp_path, "maxcut", "--set", "novalue") == 2


def test_missing_config_file_is_config_error(tmp_path):
    assert run(tmp_path, "jl", "--config", str(tmp_path / "absent.txt")) == 2


def test_maxcut_bundled(tmp_path):
    assert run(tmp_path, "maxcut", "--set", "T=1500", "--set", "trials=200") == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert set(s) == {"opt", "sdp_value", "randomized_mean", "randomized_best", "derandomized_cut", "iters"}
    assert s["derandomized_cut"] >= -(-0.878 * s["opt"] // 1) - 1
    assert s["sdp_value"] >= s["opt"]
    rows = read_csv(tmp_path / "trajectory.csv")
    assert list(rows[0]) == ["iter", "sampled_cut", "max_scale"] and len(rows) == 1500


def test_maxcut_graph_file(tmp_path):
    write_graph(random_graph(8, 0.5, seed=1), tmp_path / "g.txt")
    assert run(tmp_path, "maxcut", "--set", f"graph={tmp_path / 'g.txt'}", "--set", "T=200") == 0
    assert run(tmp_path, "maxcut", "--set", f"graph={tmp_path / 'nope.txt'}") == 2


def test_jl(tmp_path):
    code = run(tmp_path, "jl", "--set", "n=15", "--set", "d=20", "--set", "k=8",
               "--set", "T=800", "--set", "trials=100")
    assert code == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert (s["n"], s["d"], s["k"]) == (15, 20, 8)
    assert s["max_distortion"] < s["baseline_min"]
    assert np.loadtxt(tmp_path / "M.txt").shape == (8, 20)


def test_sosp_demo(tmp_path):
    assert run(tmp_path, "sosp-demo") == 0
    s = json.loads((tmp_path / "summary.json").read_text())
    assert s["saddle_hd_value"] < -10 and s["saddle_pgd_value"] < -10
    assert s["quartic_certified"] and s["cosh_certified"]
    assert s["cosh_w_norm"] <= 2 * s["cosh_bound"]
    assert (tmp_path / "saddle_hd.csv").exists() and (tmp_path / "saddle_pgd.csv").exists()

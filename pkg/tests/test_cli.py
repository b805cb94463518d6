import json

import numpy as np
from click.testing import CliRunner

from pairsearch.cli import main
from pairsearch.embed import GaussianEmbedding


def test_gen_and_calibrate(tmp_path):
    runner = CliRunner()
    out = tmp_path / "data.csv"
    res = runner.invoke(main, ["gen", "--n", "200", "--d", "4", "--seed", "3",
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert out.exists()
    res = runner.invoke(main, ["calibrate", "--dataset", str(out),
                               "--flip-rate", "0.1"])
    assert res.exit_code == 0, res.output
    assert "sigma_eps" in res.output
    assert "measured flip rate" in res.output


def test_search_bench_small(tmp_path):
    runner = CliRunner()
    res = runner.invoke(main, ["search-bench", "--n-grid", "24",
                               "--strategies", "gauss,random",
                               "--episodes", "8", "--seed", "0",
                               "--out", str(tmp_path / "bench")])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "bench" / "scaling_metrics.csv").exists()
    assert (tmp_path / "bench" / "scaling_summary.json").exists()
    assert "gauss" in res.output


def test_search_bench_with_config(tmp_path):
    config = tmp_path / "spec.json"
    config.write_text(json.dumps({"n_grid": [20], "episodes": 5,
                                  "strategies": ["random"]}))
    runner = CliRunner()
    res = runner.invoke(main, ["search-bench", "--config", str(config)])
    assert res.exit_code == 0, res.output
    assert "random" in res.output


def test_blind_bench_small(tmp_path):
    runner = CliRunner()
    res = runner.invoke(main, [
        "blind-bench", "--n", "40", "--d", "2", "--episodes", "40",
        "--dim", "2", "--modes", "ground-truth",
        "--schedule", "1,2,4", "--seed", "0", "--out", str(tmp_path / "blind")])
    assert res.exit_code == 0, res.output
    assert (tmp_path / "blind" / "blind_ground-truth.csv").exists()


def test_convergence_command(tmp_path):
    runner = CliRunner()
    out = tmp_path / "traj.csv"
    res = runner.invoke(main, ["convergence", "--steps", "200",
                               "--seeds", "0,1", "--stride", "50",
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    assert out.read_text().startswith("seed,m,mu,sigma2")


def test_embed_eval_command(tmp_path):
    runner = CliRunner()
    data = tmp_path / "data.csv"
    runner.invoke(main, ["gen", "--n", "30", "--d", "2", "--out", str(data)])
    res = runner.invoke(main, ["embed-eval", "--dataset", str(data),
                               "--triplet-count", "1500", "--dims", "2",
                               "--folds", "3", "--epochs", "60",
                               "--out", str(tmp_path / "eval.csv")])
    assert res.exit_code == 0, res.output
    assert "holdout accuracy" in res.output


def test_pca_command(tmp_path):
    rng = np.random.default_rng(0)
    emb = GaussianEmbedding(rng.standard_normal((20, 5)), np.zeros((20, 5)))
    snap = tmp_path / "snapshot.txt"
    emb.save(snap)
    out = tmp_path / "pca.csv"
    runner = CliRunner()
    res = runner.invoke(main, ["pca", "--snapshot", str(snap), "--k", "2",
                               "--out", str(out)])
    assert res.exit_code == 0, res.output
    lines = out.read_text().splitlines()
    assert lines[0] == "id,pc1,pc2"
    assert len(lines) == 21

import os

import numpy as np
import pytest

from latentgraph import cli
from latentgraph.experiments import (
    ESTIMATORS,
    ExperimentConfig,
    build_instance,
    config_from_toml,
    default_spec,
    replicate_config,
    rows_to_csv,
    run_sweep,
    write_csv,
)
from latentgraph.matio import load_matrix, save_matrix


def tiny_config(**overrides):
    base = dict(
        experiment_id="tiny",
        graph={"model": "rbf", "n": 10},
        signals={"cov": "smooth", "source": "sampled", "m": 50},
        hidden_policy="uniform",
        sweep_axis="hidden",
        sweep_values=(1,),
        estimators=(default_spec("corr"), default_spec("gsm-lr", max_iters=150, rel_tol=1e-5)),
        trials=2,
        base_seed=0,
    )
    base.update(overrides)
    return ExperimentConfig(**base)


class TestBuildInstance:
    def test_ensemble_poly_blocks(self):
        config = tiny_config(signals={"cov": "poly", "source": "ensemble", "order": 1})
        cov, truth, part = build_instance(config, 1, 0)
        assert cov.is_ensemble
        assert cov.n == part.n_observed == 9

    def test_sampled_smooth_with_noise(self):
        config = tiny_config(signals={"cov": "smooth", "source": "sampled", "m": 40, "noise": 0.1})
        cov, truth, part = build_instance(config, 2, 1)
        assert not cov.is_ensemble
        assert cov.num_samples == 40
        assert part.n_hidden == 2

    def test_sweep_axis_overrides(self):
        config = tiny_config(sweep_axis="samples", sweep_values=(25,),
                             graph={"model": "rbf", "n": 10, "hidden": 1})
        cov, _, _ = build_instance(config, 25, 0)
        assert cov.num_samples == 25

    def test_unknown_estimator_rejected(self):
        with pytest.raises(ValueError):
            tiny_config(estimators=(default_spec("corr"),)._replace() if False else
                        (default_spec("corr"), default_spec("corr").__class__(
                            name="nope", hp=default_spec("corr").hp,
                            cfg=default_spec("corr").cfg)))


class TestRunSweep:
    def test_rows_structure_and_determinism(self):
        config = tiny_config()
        rows1 = run_sweep(config)
        rows2 = run_sweep(config)
        assert rows_to_csv(rows1) == rows_to_csv(rows2)
        assert len(rows1) == 2 * 2  # trials x estimators
        for row in rows1:
            assert 0.0 <= float(row["fscore"]) <= 1.0
            assert row["perfect"] in (0, 1)
            assert row["wall_time"] == ""
            assert row["status"] in ("converged", "max_iters")

    def test_estimator_failure_recorded_not_raised(self):
        bad = default_spec("glasso")
        bad = bad.__class__(name="glasso", hp=bad.hp.replace(lambda1=0.0),
                            cfg=bad.cfg, threshold=bad.threshold)
        # lambda1=0 is legal for glasso; use an impossible config instead:
        config = tiny_config(
            signals={"cov": "poly", "source": "ensemble", "order": 1},
            estimators=(default_spec("gst", max_iters=40, rel_tol=1e-4),),
            graph={"model": "rbf", "n": 6},
            sweep_values=(5,),  # leaves one observed node: estimators must fail
            trials=1,
        )
        rows = run_sweep(config)
        assert len(rows) == 1
        assert rows[0]["status"].startswith("error:")
        assert rows[0]["fscore"] == ""

    def test_worker_pool_matches_serial(self):
        config = tiny_config()
        serial = rows_to_csv(run_sweep(config, workers=1))
        parallel = rows_to_csv(run_sweep(config, workers=2))
        assert serial == parallel

    def test_csv_format(self, tmp_path):
        config = tiny_config()
        rows = run_sweep(config)
        path = tmp_path / "out.csv"
        write_csv(rows, path)
        text = path.read_text()
        header = text.splitlines()[0]
        assert header.startswith("experiment,trial,seed,estimator,h,m,noise")
        assert "\r" not in text


class TestReplicates:
    def test_all_bundled_configs_materialize(self):
        for name in ("fig1a", "fig1b", "fig1c", "fig3a", "fig3a-mrf", "fig3b", "fig3c"):
            config = replicate_config(name, trials=2)
            assert config.trials == 2
            assert config.estimators

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            replicate_config("fig9z")


class TestTomlConfig:
    def test_round_trip(self, tmp_path):
        path = tmp_path / "cfg.toml"
        path.write_text(
            """
[experiment]
id = "demo"
trials = 3
seed = 11

[graph]
model = "er"
p = 0.3
n = 12

[signals]
cov = "poly"
source = "ensemble"
order = 1

[hidden]
policy = "min_degree"

[sweep]
axis = "hidden"
values = [1, 2]

[[estimators]]
name = "gst"
threshold = 0.4
max_iters = 500
eta = 123.0
"""
        )
        config = config_from_toml(path)
        assert config.experiment_id == "demo"
        assert config.trials == 3
        assert config.base_seed == 11
        assert config.sweep_values == (1, 2)
        assert config.hidden_policy == "min_degree"
        spec = config.estimators[0]
        assert spec.name == "gst"
        assert spec.threshold == 0.4
        assert spec.hp.eta == 123.0
        assert spec.cfg.max_iters == 500


class TestCli:
    def test_usage_error_exit_code(self, capsys):
        assert cli.cli_main(["infer", "--alg", "gst"]) == 1  # missing --cov/--signals and --out
        assert cli.cli_main(["no-such-command"]) == 1

    def test_generate_and_infer_and_evaluate(self, tmp_path, capsys):
        graph_path = tmp_path / "g.csv"
        sig_path = tmp_path / "x.csv"
        rc = cli.cli_main([
            "generate", "--model", "rbf", "--n", "12", "--seed", "3",
            "--out-graph", str(graph_path),
            "--signals", "stationary", "--order", "1", "--m", "400",
            "--out-signals", str(sig_path),
        ])
        assert rc == 0
        est_path = tmp_path / "est.csv"
        rc = cli.cli_main([
            "infer", "--alg", "gst", "--signals", str(sig_path),
            "--out", str(est_path), "--max-iters", "600", "--rel-tol", "1e-6",
        ])
        assert rc == 0
        assert est_path.exists()
        rc = cli.cli_main([
            "evaluate", "--est", str(est_path), "--truth", str(graph_path), "--threshold", "0.3",
        ])
        assert rc == 0
        out = capsys.readouterr().out
        assert "fscore=" in out and "perfect=" in out

    def test_evaluate_identical_files_perfect(self, tmp_path, capsys):
        adj = np.zeros((5, 5))
        adj[0, 1] = adj[1, 0] = 1.0
        adj[2, 3] = adj[3, 2] = 1.0
        path = tmp_path / "a.csv"
        save_matrix(adj, path)
        rc = cli.cli_main(["evaluate", "--est", str(path), "--truth", str(path)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "fscore=1.0000" in out and "perfect=1" in out

    def test_infer_on_small_covariance(self, tmp_path):
        rng = np.random.default_rng(0)
        m = rng.standard_normal((4, 200))
        cov = m @ m.T / 200
        cov_path = tmp_path / "c.csv"
        save_matrix(cov, cov_path)
        out_path = tmp_path / "s.csv"
        rc = cli.cli_main([
            "infer", "--alg", "gst", "--cov", str(cov_path), "--out", str(out_path),
            "--max-iters", "400", "--hp", "eta=50",
        ])
        assert rc == 0
        est = load_matrix(out_path)
        assert est.shape == (4, 4)
        assert np.allclose(est, est.T)

    def test_bad_hp_key(self, tmp_path, capsys):
        rc = cli.cli_main([
            "infer", "--alg", "gst", "--cov", "x.csv", "--out", "y.csv", "--hp", "nope=1",
        ])
        assert rc == 1

    def test_runtime_error_exit_code(self, tmp_path):
        rc = cli.cli_main([
            "infer", "--alg", "gst", "--cov", str(tmp_path / "missing.csv"), "--out", "y.csv",
        ])
        assert rc == 2

    def test_replicate_determinism(self, tmp_path):
        out1 = tmp_path / "r1.csv"
        out2 = tmp_path / "r2.csv"
        args = ["replicate", "fig1a", "--trials", "1"]
        assert cli.cli_main(args + ["--out", str(out1)]) == 0
        assert cli.cli_main(args + ["--out", str(out2)]) == 0
        assert out1.read_bytes() == out2.read_bytes()

    def test_sweep_from_toml(self, tmp_path):
        cfg_path = tmp_path / "c.toml"
        cfg_path.write_text(
            """
[experiment]
id = "mini"
trials = 1

[graph]
model = "rbf"
n = 8

[signals]
cov = "smooth"
source = "sampled"
m = 30

[sweep]
axis = "hidden"
values = [1]

[[estimators]]
name = "corr"
"""
        )
        out = tmp_path / "res.csv"
        rc = cli.cli_main(["sweep", "--config", str(cfg_path), "--out", str(out)])
        assert rc == 0
        assert out.read_text().count("\n") == 2  # header + one row

import json

import numpy as np
import pandas as pd
import pytest

from dsmd.algorithms import run_dsmd
from dsmd.cli import main
from dsmd.harness import (
    CSV_COLUMNS,
    ConfigError,
    ExperimentConfig,
    build_instance,
    derive_seeds,
    disagreement_report,
    fit_rate,
    rate_fit,
    run_experiment,
)
from dsmd.network import MixingSchedule
from dsmd.problem import global_optimum


def small(**kw):
    base = dict(algorithm="dsmd", constraint="box", m=5, d=3, sigma=0.25, T=64, realizations=3, master_seed=1)
    base.update(kw)
    return ExperimentConfig(**base)


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = small(checkpoints=[1, 5, 64], output=str(tmp_path / "x"), activation=0.75)
        path = tmp_path / "cfg.yaml"
        cfg.dump(path)
        assert ExperimentConfig.load(path) == cfg
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg
        text = path.read_text()
        assert "network:" in text and "problem:" in text and "run:" in text

    def test_all_errors_listed(self):
        cfg = small(m=0, T=-1, activation=2.0, algorithm="sgd")
        with pytest.raises(ConfigError) as err:
            cfg.validate()
        assert len(err.value.errors) >= 4

    def test_unsupported_pairing_named(self):
        with pytest.raises(ConfigError, match="unsupported pairing"):
            small(algorithm="dsps", constraint="simplex", geometry="entropy").validate()
        with pytest.raises(ConfigError, match="unsupported pairing"):
            small(algorithm="dsmd", constraint="box", geometry="entropy").validate()

    def test_checkpoints_in_range(self):
        with pytest.raises(ConfigError, match="checkpoints"):
            small(checkpoints=[0, 65]).validate()

    def test_unknown_keys(self):
        with pytest.raises(ConfigError, match="unknown"):
            ExperimentConfig.from_dict({"run": {"Tee": 3}})

    def test_geometry_resolution(self):
        assert small(constraint="simplex").mirror_geometry().is_entropy
        assert not small(constraint="simplex", algorithm="dsps").mirror_geometry().is_entropy
        assert not small(constraint="box").mirror_geometry().is_entropy

    def test_default_checkpoints(self):
        assert small(T=100).checkpoint_list() == [1, 2, 4, 8, 16, 32, 64]


def test_seed_derivation_distinct():
    seeds = {derive_seeds(3, r) for r in range(100)}
    assert len(seeds) == 100
    assert derive_seeds(3, 7) == derive_seeds(3, 7)


class TestRunExperiment:
    def test_csv_schema_and_completeness(self, tmp_path):
        cfg = small(output=str(tmp_path / "out" / "run"), checkpoints=[1, 8, 64])
        run_experiment(cfg)
        df = pd.read_csv(tmp_path / "out" / "run.csv")
        assert list(df.columns) == CSV_COLUMNS
        keys = df[["realization", "t", "node"]]
        assert not keys.duplicated().any()
        assert len(df) == 3 * 3 * 5
        assert keys.equals(keys.sort_values(["realization", "t", "node"]).reset_index(drop=True))
        assert (df[["avg_error_sq", "last_error_sq", "disagreement"]] >= 0).all().all()

    def test_summary_json(self, tmp_path):
        cfg = small(output=str(tmp_path / "run"))
        run_experiment(cfg)
        s = json.loads((tmp_path / "run.json").read_text())
        for key in ("config", "constants", "checkpoints", "fit", "runtime_seconds"):
            assert key in s
        for key in ("sigma_F", "G", "alpha", "beta", "c", "c_prime", "c1", "c2", "c_hat"):
            assert key in s["constants"]
        assert {"t", "mean", "stderr", "theorem_bound"} <= set(s["checkpoints"][0])
        assert ExperimentConfig.from_dict(s["config"]) == cfg

    def test_byte_identical_reruns(self, tmp_path):
        for name in ("a", "b"):
            run_experiment(small(constraint="simplex", output=str(tmp_path / name)))
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_parallel_matches_serial(self, tmp_path):
        a = run_experiment(small(), write=False).metrics
        b = run_experiment(small(), workers=2, write=False).metrics
        pd.testing.assert_frame_equal(a, b)

    def test_aggregation_matches_csv(self, tmp_path):
        res = run_experiment(small(output=str(tmp_path / "r")))
        df = pd.read_csv(tmp_path / "r.csv")
        for row in res.summary["checkpoints"]:
            vals = [df[(df.t == row["t"]) & (df.realization == r)].avg_error_sq.mean() for r in range(3)]
            assert row["mean"] == pytest.approx(np.mean(vals), rel=1e-12, abs=1e-300)
            assert row["stderr"] == pytest.approx(np.std(vals, ddof=1) / np.sqrt(3), rel=1e-9, abs=1e-300)

    def test_degenerate_matches_direct_run(self):
        cfg = small(m=1, sigma=0.0, realizations=1, T=10_000, checkpoints=[10_000])
        res = run_experiment(cfg, write=False)
        inst, geom = build_instance(cfg)
        direct = run_dsmd(inst, geom, MixingSchedule(1), 10_000)
        x_star = global_optimum(inst)
        expected = np.sum((direct.x_avg[0] - x_star) ** 2)
        assert res.summary["checkpoints"][-1]["mean"] == pytest.approx(expected, rel=1e-12)
        assert expected <= 1e-3

    def test_epoch_rows_past_last_epoch(self):
        cfg = small(algorithm="epoch-dsmd", T=64, checkpoints=[4, 60, 64])
        df = run_experiment(cfg, write=False).metrics
        at60 = df[df.t == 60].avg_error_sq.to_numpy()
        at64 = df[df.t == 64].avg_error_sq.to_numpy()
        np.testing.assert_array_equal(at60, at64)

    def test_algorithms_paired_by_seed(self):
        a = run_experiment(small(algorithm="dsmd", checkpoints=[1]), write=False).metrics
        b = run_experiment(small(algorithm="epoch-dsmd", checkpoints=[1]), write=False).metrics
        # same instance, same start, same first-round disagreement
        np.testing.assert_array_equal(a.last_error_sq, b.last_error_sq)


class TestRateFit:
    T = np.array([64, 128, 256, 512, 1024, 2048, 4096], dtype=float)

    def test_exact_one_over_T(self):
        rep = fit_rate(self.T, 5 / self.T, "one_over_T")
        assert rep.coefficients[0] == pytest.approx(5, rel=1e-12)
        assert rep.r_squared == pytest.approx(1.0, abs=1e-12)
        assert rep.scaled_growth == pytest.approx(1.0)

    def test_exact_log_model(self):
        rep = fit_rate(self.T, 3 * np.log(self.T) / self.T + 2 / self.T, "lnT_over_T")
        np.testing.assert_allclose(rep.coefficients, [3, 2], atol=1e-9)

    def test_insufficient(self):
        with pytest.raises(ValueError):
            fit_rate([64, 128, 256], [1, 1, 1])
        with pytest.raises(ValueError, match="octaves"):
            fit_rate([64, 80, 100, 120], [1, 1, 1, 1])

    def test_from_metrics(self):
        rows = [(r, t, n, 5 / t, 0, 0, 0) for r in range(2) for t in self.T.astype(int) for n in range(3)]
        df = pd.DataFrame(rows, columns=CSV_COLUMNS)
        rep = rate_fit(df, "one_over_T")
        assert rep.coefficients[0] == pytest.approx(5)


class TestDisagreement:
    def test_single_node_zero(self):
        cfg = small(m=1, T=32, checkpoints=list(range(1, 33)))
        res = run_experiment(cfg, write=False)
        rep = disagreement_report(res.metrics, res.constants)
        assert rep.lhs == [0.0] and rep.ratio == 0.0

    def test_needs_every_round(self):
        res = run_experiment(small(), write=False)
        with pytest.raises(ValueError, match="every round"):
            disagreement_report(res.metrics, res.constants)

    def test_consensus_run_far_below_bound(self):
        cfg = small(m=6, T=100, checkpoints=list(range(1, 101)), init="random")
        res = run_experiment(cfg, write=False)
        rep = disagreement_report(res.metrics, res.constants)
        assert rep.ratio < 1e-3
        assert res.summary["disagreement"]["ratio"] == pytest.approx(rep.ratio)


class TestCli:
    def test_runs_and_writes(self, tmp_path, capsys):
        out = tmp_path / "cli"
        code = main(["--algorithm", "epoch-dsmd", "--constraint", "simplex", "--nodes", "4", "--dim", "3",
                     "--iters", "60", "--realizations", "2", "--seed", "5", "--activation", "0.5",
                     "--window-B", "3", "--sigma", "0.5", "--output", str(out), "--checkpoints", "4,12,28,60"])
        assert code == 0
        df = pd.read_csv(f"{out}.csv")
        assert sorted(df.t.unique()) == [4, 12, 28, 60]
        s = json.loads(open(f"{out}.json").read())
        assert s["config"]["network"]["B"] == 3
        assert "mean error" in capsys.readouterr().out

    def test_config_file_with_overrides(self, tmp_path, capsys):
        path = tmp_path / "c.yaml"
        small(T=32).dump(path)
        assert main(["--config", str(path), "--iters", "16", "--dump-config"]) == 0
        assert "T: 16" in capsys.readouterr().out

    def test_invalid_pairing_exit_code(self, capsys):
        assert main(["--algorithm", "dsps", "--constraint", "simplex", "--geometry", "entropy"]) == 2
        assert "unsupported pairing" in capsys.readouterr().err

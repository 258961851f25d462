"""
Tests for the simulation benchmark harness.
"""

import math

import numpy as np
import pandas as pd
import pytest

from app.models.enums import Method, OutlierCase, PenaltyFamily, RunMode
from app.models.run import RunConfig
from app.models.simulation import SimConfig
from app.services.bench import REPLICATE_COLUMNS, Benchmark, bench, replicate_seeds
from app.services.simulate import generate, prepare_splits
from app.services.tuning import grid_search


def _bench_cfg(tmp_path, **overrides) -> RunConfig:
    values = dict(
        mode=RunMode.BENCH,
        sim=SimConfig(
            n_tasks=6, n_features=3, n_clusters=3, n_samples=30, sigma2=1.0, kappa=0.34, case=OutlierCase.CASE2
        ),
        lambda1_grid=[1.0],
        lambda2_grid=[0.5],
        lambda3_grid=[1.0, 10.0],
        k=2,
        replicates=2,
        seed=11,
        workers=1,
        output_dir=tmp_path,
    )
    values.update(overrides)
    return RunConfig(**values)


class TestBenchmark:
    """Tests for the Benchmark harness."""

    def test_replicate_seeds_are_deterministic(self):
        """Test that replicate seeds depend only on the run seed."""
        assert replicate_seeds(3, 4) == replicate_seeds(3, 4)
        assert len(set(replicate_seeds(3, 4))) == 4
        assert replicate_seeds(3, 2) == replicate_seeds(3, 4)[:2]

    def test_tables_and_files(self, tmp_path):
        """Test one row per (method, replicate) and the written outputs."""
        replicates, summary = bench(_bench_cfg(tmp_path))
        assert list(replicates.columns) == list(REPLICATE_COLUMNS)
        assert len(replicates) == 2 * len(Method)
        assert set(summary["method"]) == {m.value for m in Method}
        assert (summary["replicates"] == 2).all()
        for name in ("replicates.csv", "summary.csv", "config.json"):
            assert (tmp_path / name).exists()
        assert "workers" not in (tmp_path / "config.json").read_text()

    def test_convex_baseline_reports_no_detection(self, tmp_path):
        """Test that MTLCVX rows carry no outlier rates and an infinite lambda3."""
        replicates, _ = Benchmark(_bench_cfg(tmp_path, methods=[Method.MTLCVX])).run()
        assert replicates["tpr"].isna().all()
        assert replicates["fpr"].isna().all()
        assert all(math.isinf(v) for v in replicates["lambda3"])

    def test_metrics_in_range(self, tmp_path):
        """Test that every rate lies in [0, 1] and errors are non-negative."""
        replicates, _ = Benchmark(_bench_cfg(tmp_path, methods=[Method.MTLRRC_GS, Method.HMTLK])).run()
        assert (replicates["nmse"] >= 0).all()
        assert (replicates["rmse"] >= 0).all()
        rates = pd.concat([replicates["tpr"], replicates["fpr"]]).dropna()
        assert ((rates >= 0) & (rates <= 1)).all()

    def test_several_kappas(self, tmp_path):
        """Test that each kappa gets its own summary row per method."""
        replicates, summary = Benchmark(
            _bench_cfg(tmp_path, kappas=[0.0, 0.5], methods=[Method.MTLRRC_GL], replicates=1)
        ).run()
        assert sorted(replicates["kappa"]) == [0.0, 0.5]
        assert len(summary) == 2

    def test_outputs_identical_across_runs_and_workers(self, tmp_path):
        """Test byte-identical outputs for a fixed seed with 1 and 4 workers."""
        outputs = []
        out_dir = tmp_path / "bench"
        for workers in (1, 1, 4):
            bench(_bench_cfg(out_dir, workers=workers, methods=[Method.MTLRRC_GS, Method.MTLCVX]), out_dir)
            names = ("replicates.csv", "summary.csv", "config.json")
            outputs.append({name: (out_dir / name).read_bytes() for name in names})
        assert outputs[0] == outputs[1] == outputs[2]

    def test_tasks_without_signal_left_out_of_nmse(self, tmp_path):
        """Test that clusters with no features (all-zero truth rows) do not abort the run."""
        cfg = _bench_cfg(
            tmp_path,
            sim=SimConfig(n_tasks=6, n_features=1, n_clusters=3, n_samples=30, sigma2=1.0, kappa=0.0),
            methods=[Method.MTLRRC_GL, Method.MTLCVX],
        )
        replicates, _ = Benchmark(cfg).run()
        assert len(replicates) == 4
        assert np.isfinite(replicates["nmse"]).all()
        assert (replicates["nmse"] < 10).all()

    def test_test_truth_uses_training_centring(self, tmp_path):
        """Test that y* is the noiseless response on the training-centred test design."""
        cfg = _bench_cfg(
            tmp_path, sim=SimConfig(n_tasks=6, n_features=1, n_clusters=3, n_samples=30, sigma2=1.0, kappa=0.0)
        )
        data, truth = generate(cfg.sim)
        splits, stats = prepare_splits(data, cfg.split, 5)
        y_star = Benchmark(cfg)._test_truth(data, splits, truth, stats)
        for m, task in enumerate(data):
            rows = np.asarray(splits.indices[m][2], dtype=int)
            expected = (task.X[rows] - stats.feature_mean[m]) @ truth.W_true[m]
            np.testing.assert_allclose(y_star[m], expected)
            if not truth.W_true[m].any():
                assert not y_star[m].any()
        # standardized design times standardized truth reproduces y*
        for m, x_test in enumerate(splits.test):
            np.testing.assert_allclose(x_test.X @ (truth.W_true[m] * stats.feature_scale[m]), y_star[m], atol=1e-10)

    def test_convex_baseline_matches_frozen_outliers(self, tmp_path):
        """Test that MTLCVX equals group-lasso MTLRRC whose threshold keeps O at zero."""
        cfg = _bench_cfg(tmp_path, lambda3_grid=[1e8])
        data, _ = generate(cfg.sim.model_copy(update={"seed": 3}))
        splits, _ = prepare_splits(data, cfg.split, 3)
        bench_run = Benchmark(cfg.model_copy(update={"methods": [Method.MTLCVX]}))
        W_cvx, detected, key = bench_run._run_method(Method.MTLCVX, splits, cfg)
        robust = grid_search(splits, cfg, penalty=PenaltyFamily.GROUP_LASSO)
        assert detected is None
        assert math.isinf(key[2])
        assert not robust.fit.params.O.any()
        np.testing.assert_allclose(W_cvx, robust.fit.params.W, atol=1e-3)


@pytest.mark.slow
class TestDeskScaleBenchmark:
    """Desk-scale reproduction of the outlier-detection trends."""

    def _run(self, tmp_path, case: OutlierCase, kappa: float):
        cfg = RunConfig(
            mode=RunMode.BENCH,
            sim=SimConfig(n_tasks=30, n_features=20, n_clusters=3, n_samples=60, sigma2=5.0, kappa=kappa, case=case),
            split=(20, 20, 20),
            lambda1_grid=[0.1, 1.0],
            lambda2_grid=[0.1, 1.0],
            lambda3_grid=[0.3, 1.0, 3.0],
            k=5,
            replicates=10,
            seed=2024,
            workers=0,
            methods=[Method.MTLRRC_GL, Method.MTLRRC_GS, Method.MTLRRC_GM],
            output_dir=tmp_path,
        )
        _, summary = Benchmark(cfg).run()
        return summary.set_index("method")

    def test_case2_detection(self, tmp_path):
        """Test that group SCAD detects uniform outlier tasks at kappa = 0.2."""
        summary = self._run(tmp_path, OutlierCase.CASE2, 0.2)
        assert summary.loc["MTLRRC-GS", "tpr_mean"] >= 0.75
        assert summary.loc["MTLRRC-GS", "fpr_mean"] <= 0.10
        assert summary.loc["MTLRRC-GS", "nmse_mean"] <= summary.loc["MTLRRC-GL", "nmse_mean"] + 0.02

    def test_case1_false_positives(self, tmp_path):
        """Test that the non-convex penalties rarely flag clean tasks in Case 1."""
        summary = self._run(tmp_path, OutlierCase.CASE1, 0.1)
        assert summary.loc["MTLRRC-GS", "fpr_mean"] <= 0.05
        assert summary.loc["MTLRRC-GM", "fpr_mean"] <= 0.05

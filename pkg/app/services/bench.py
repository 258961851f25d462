"""
Simulation benchmark: generate, split, tune and evaluate every method over replicates.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from app.core.config import resolve_workers
from app.core.exceptions import MTLRRCError, ReplicateError
from app.models.data import DataSplits, MultiTaskData, Standardization
from app.models.enums import Method
from app.models.metrics import MetricReport
from app.models.run import RunConfig
from app.models.simulation import GroundTruth
from app.services import evaluate, glm
from app.services.simulate import generate, prepare_splits
from app.services.tuning import grid_search
from app.utils import io

REPLICATE_COLUMNS = (
    "method",
    "kappa",
    "case",
    "replicate",
    "seed",
    "nmse",
    "rmse",
    "tpr",
    "fpr",
    "lambda1",
    "lambda2",
    "lambda3",
)


def replicate_seeds(seed: int, replicates: int) -> list[int]:
    """Independent per-replicate seeds spawned from the run seed."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(replicates)]


class Benchmark:
    """
    Replicate harness comparing MTLRRC with group lasso / SCAD / MCP outlier
    penalties, MTLCVX (outliers pinned at zero) and HMTLK.

    HMTLK keeps the single-task estimates of the tasks flagged by the Hotelling-style
    detector and fits MTLCVX on the remaining tasks.
    """

    def __init__(self, cfg: RunConfig):
        self.logger = logging.getLogger("mtlrrc.Benchmark")
        self.cfg = cfg
        self.seeds = replicate_seeds(cfg.seed, cfg.replicates)

    def _test_truth(
        self, data: MultiTaskData, splits: DataSplits, truth: GroundTruth, stats: Standardization
    ) -> list[np.ndarray]:
        """
        Noiseless test responses ``(X_m - xbar_m) w*_m`` on the training-centred design.

        Predictions ``X_std W_std`` use the same centring, so the training noise mean does
        not enter the error.
        """
        responses = []
        for m, task in enumerate(data):
            test_rows = np.asarray(splits.indices[m][2], dtype=int)
            responses.append((task.X[test_rows] - stats.feature_mean[m]) @ truth.W_true[m])
        return responses

    def _evaluate(
        self,
        W_std: np.ndarray,
        detected: np.ndarray | None,
        y_star: list[np.ndarray],
        scored: list[int],
        splits: DataSplits,
        truth: GroundTruth,
        stats: Standardization,
    ) -> MetricReport:
        X_test = [task.X for task in splits.test]
        tpr, fpr = (None, None) if detected is None else evaluate.outlier_rates(truth.is_outlier, detected)
        per_task = np.full(len(y_star), np.nan)
        if scored:
            per_task[scored] = evaluate.per_task_nmse(
                [y_star[m] for m in scored], [X_test[m] for m in scored], W_std[scored]
            )
        return MetricReport(
            nmse=float(np.mean(per_task[scored])) if scored else math.nan,
            rmse=evaluate.rmse(truth.W_true, stats.coef_to_original(W_std)),
            tpr=tpr,
            fpr=fpr,
            per_task_nmse=per_task.tolist(),
            detected=[] if detected is None else [int(m) for m in np.flatnonzero(detected)],
        )

    def _run_method(self, method: Method, splits: DataSplits, cfg: RunConfig) -> tuple[np.ndarray, np.ndarray | None, tuple]:
        if method.penalty is not None:
            result = grid_search(splits, cfg, penalty=method.penalty)
            params = result.fit.params
            return params.W, evaluate.detected_outliers(params.O), result.best.key()
        if method == Method.MTLCVX:
            result = grid_search(splits, cfg, lambda3_grid=[math.inf], freeze_outliers=True)
            return result.fit.params.W, None, result.best.key()

        # HMTLK
        _, stl_W = glm.fit_stl(splits.train, cfg.stl_penalty)
        flagged = set(evaluate.hmtlk_detect(stl_W))
        detected = np.array([m in flagged for m in range(splits.train.n_tasks)])
        W = stl_W.copy()
        rest = [m for m in range(splits.train.n_tasks) if m not in flagged]
        key: tuple = (math.nan, math.nan, math.nan)
        if rest:
            subset = DataSplits(
                train=splits.train.subset(rest),
                validation=splits.validation.subset(rest) if splits.validation is not None else None,
            )
            result = grid_search(subset, cfg, lambda3_grid=[math.inf], freeze_outliers=True)
            W[rest] = result.fit.params.W
            key = result.best.key()
        return W, detected, key

    def run_replicate(self, kappa: float, replicate: int) -> list[dict[str, Any]]:
        seed = self.seeds[replicate]
        cfg = self.cfg
        inner = cfg.model_copy(update={"workers": 1}) if resolve_workers(cfg.workers) > 1 else cfg
        try:
            sim = cfg.sim.model_copy(update={"kappa": kappa, "seed": seed})
            data, truth = generate(sim)
            splits, stats = prepare_splits(data, cfg.split, seed)
            if splits.test is None:
                raise ValueError("benchmark needs a test split")
            y_star = self._test_truth(data, splits, truth, stats)
            scored = [m for m, y in enumerate(y_star) if not evaluate.is_constant_response(y)]
            if len(scored) < len(y_star):
                skipped = sorted(set(range(len(y_star))) - set(scored))
                self.logger.warning(
                    f"kappa={kappa} replicate={replicate}: tasks {skipped} have a constant noiseless test "
                    f"response and are left out of the NMSE"
                )

            rows = []
            for method in cfg.methods:
                W_std, detected, key = self._run_method(method, splits, inner)
                report = self._evaluate(W_std, detected, y_star, scored, splits, truth, stats)
                row = report.to_row(
                    method=method.value, kappa=kappa, case=sim.case.value, replicate=replicate, seed=seed
                )
                row.update(lambda1=key[0], lambda2=key[1], lambda3=key[2])
                self.logger.info(
                    f"kappa={kappa} replicate={replicate} {method.value}: nmse={row['nmse']:.4f} rmse={row['rmse']:.4f}"
                )
                rows.append(row)
            return rows
        except (MTLRRCError, ValueError) as e:
            raise ReplicateError(str(e), replicate=replicate, kappa=kappa) from e

    def run(self) -> tuple[pd.DataFrame, pd.DataFrame]:
        jobs = [(kappa, r) for kappa in self.cfg.bench_kappas for r in range(self.cfg.replicates)]
        workers = resolve_workers(self.cfg.workers)
        self.logger.info(f"Benchmark: {len(jobs)} replicate runs, methods={[m.value for m in self.cfg.methods]}")
        if workers > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(lambda job: self.run_replicate(*job), jobs))
        else:
            outcomes = [self.run_replicate(*job) for job in jobs]

        replicates = pd.DataFrame([row for rows in outcomes for row in rows], columns=list(REPLICATE_COLUMNS))
        return replicates, evaluate.summarize(replicates)

    def write(self, replicates: pd.DataFrame, summary: pd.DataFrame, out_dir: Path) -> None:
        out_dir = io.ensure_dir(out_dir)
        io.write_frame(replicates, out_dir / "replicates.csv")
        io.write_frame(summary, out_dir / "summary.csv")
        # workers excluded: outputs match across worker counts
        io.write_json(self.cfg.model_dump(mode="json", exclude={"workers"}), out_dir / "config.json")
        self.logger.info(f"Benchmark results written to {out_dir}")


def bench(cfg: RunConfig, out_dir: Path | None = None) -> tuple[pd.DataFrame, pd.DataFrame]:
    """
    Run the benchmark and write ``replicates.csv``, ``summary.csv`` and ``config.json``.

    Returns:
        Tuple of the replicate table and the summary table
    """
    runner = Benchmark(cfg)
    replicates, summary = runner.run()
    runner.write(replicates, summary, out_dir or cfg.output_dir)
    return replicates, summary

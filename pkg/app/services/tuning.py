"""
Hyperparameter selection on a validation split.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict

from app.core.config import resolve_workers
from app.core.exceptions import GridSearchError, InvalidArgumentError, MTLRRCError
from app.models.data import DataSplits, MultiTaskData
from app.models.enums import PenaltyFamily
from app.models.graph import TaskGraph
from app.models.params import FitResult, HyperParams, ModelParams, TaskCoef
from app.models.run import RunConfig
from app.services import glm
from app.services.solver import fit, initial_params
from app.services.taskgraph import knn_weights

GRID_COLUMNS = (
    "lambda1",
    "lambda2",
    "lambda3",
    "validation_loss",
    "objective",
    "outer_iters",
    "converged",
    "n_clusters",
    "n_outliers",
    "error",
)


class GridSearchResult(BaseModel):
    """Selected hyperparameters, their fit, the grid table and the shared STL/graph inputs."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    best: HyperParams
    fit: FitResult
    table: pd.DataFrame
    graph: TaskGraph
    stl_w0: np.ndarray
    stl_W: np.ndarray


def validation_loss(data: MultiTaskData, w0: np.ndarray, W: np.ndarray) -> float:
    """Mean per-task validation loss (Gaussian MSE, Bernoulli deviance) over non-empty tasks."""
    losses = [
        glm.validation_loss(task, TaskCoef(intercept=w0[m], coef=W[m]))
        for m, task in enumerate(data)
        if task.n_samples > 0
    ]
    if not losses:
        raise InvalidArgumentError("validation split has no samples")
    return float(np.mean(losses))


class GridSearch:
    """
    Grid search over (lambda1, lambda2, lambda3).

    The STL estimate and the k-NN graph are computed once on the training split. Each
    (lambda1, lambda2) pair walks the lambda3 grid from large to small, warm-starting
    every fit from the previous one. Pairs run concurrently; rows are merged by grid
    index so the table does not depend on the worker count.
    """

    def __init__(
        self,
        splits: DataSplits,
        cfg: RunConfig,
        penalty: Optional[PenaltyFamily] = None,
        lambda3_grid: Optional[Sequence[float]] = None,
        freeze_outliers: bool = False,
    ):
        self.logger = logging.getLogger("mtlrrc.GridSearch")
        if splits.validation is None:
            raise InvalidArgumentError("grid search needs a validation split")
        self.train = splits.train
        self.validation = splits.validation
        self.cfg = cfg
        self.penalty = penalty or cfg.penalty
        self.lambda3_path = sorted(lambda3_grid if lambda3_grid is not None else cfg.lambda3_grid, reverse=True)
        self.freeze_outliers = freeze_outliers

        self.stl_w0, self.stl_W = glm.fit_stl(self.train, cfg.stl_penalty)
        k = cfg.k
        if k >= self.train.n_tasks:
            k = self.train.n_tasks - 1
            self.logger.warning(f"k={cfg.k} is not below T={self.train.n_tasks}; using k={k}")
        self.graph = knn_weights(self.stl_W, k) if k >= 1 else TaskGraph(n_tasks=self.train.n_tasks)
        self.init = initial_params(self.train, self.graph, (self.stl_w0, self.stl_W))

    def _run_pair(self, lambda1: float, lambda2: float) -> list[tuple[dict[str, Any], Optional[FitResult]]]:
        rows = []
        warm: ModelParams = self.init
        for lambda3 in self.lambda3_path:
            row: dict[str, Any] = {"lambda1": lambda1, "lambda2": lambda2, "lambda3": lambda3}
            try:
                hp = HyperParams.build(
                    lambda1, lambda2, lambda3, self.penalty, self.cfg.gamma, nu=self.cfg.nu, k=self.graph.k or self.cfg.k
                )
                result = fit(
                    self.train,
                    self.graph,
                    hp,
                    solver=self.cfg.solver,
                    tol=self.cfg.tol,
                    max_outer=self.cfg.max_outer,
                    init=warm,
                    freeze_outliers=self.freeze_outliers,
                )
                warm = result.params
                row.update(
                    validation_loss=validation_loss(self.validation, result.params.w0, result.params.W),
                    objective=result.objective,
                    outer_iters=result.outer_iters,
                    converged=result.converged,
                    n_clusters=result.n_clusters,
                    n_outliers=len(result.outlier_tasks),
                    error=None,
                )
                rows.append((row, result))
            except (MTLRRCError, ValueError) as e:
                self.logger.warning(f"Grid point {row} failed: {e}")
                row.update(error=str(e))
                rows.append((row, None))
        return rows

    def run(self) -> GridSearchResult:
        pairs = [(l1, l2) for l1 in self.cfg.lambda1_grid for l2 in self.cfg.lambda2_grid]
        workers = resolve_workers(self.cfg.workers)
        self.logger.info(
            f"Grid search: {len(pairs)} (lambda1, lambda2) pairs x {len(self.lambda3_path)} lambda3 values, "
            f"penalty={self.penalty.value}, workers={workers}"
        )
        if workers > 1 and len(pairs) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                outcomes = list(pool.map(lambda pair: self._run_pair(*pair), pairs))
        else:
            outcomes = [self._run_pair(*pair) for pair in pairs]

        entries = [entry for outcome in outcomes for entry in outcome]
        table = pd.DataFrame([row for row, _ in entries], columns=list(GRID_COLUMNS))

        candidates = [
            (row["validation_loss"], (row["lambda1"], row["lambda2"], row["lambda3"]), result)
            for row, result in entries
            if result is not None and math.isfinite(row["validation_loss"])
        ]
        if not candidates:
            raise GridSearchError(
                "every grid point failed",
                diagnostics=[{k: row[k] for k in ("lambda1", "lambda2", "lambda3", "error")} for row, _ in entries],
            )
        loss, key, best_fit = min(candidates, key=lambda c: (c[0], c[1]))
        self.logger.info(f"Selected lambda=({key[0]:g}, {key[1]:g}, {key[2]:g}) with validation loss {loss:.6g}")
        return GridSearchResult(
            best=best_fit.hyperparams,
            fit=best_fit,
            table=table,
            graph=self.graph,
            stl_w0=self.stl_w0,
            stl_W=self.stl_W,
        )


def grid_search(
    splits: DataSplits,
    cfg: RunConfig,
    penalty: Optional[PenaltyFamily] = None,
    lambda3_grid: Optional[Sequence[float]] = None,
    freeze_outliers: bool = False,
) -> GridSearchResult:
    """
    Select (lambda1, lambda2, lambda3) by validation loss; ties go to the
    lexicographically smallest point.

    Raises:
        GridSearchError: every grid point failed, per-point diagnostics attached
    """
    return GridSearch(splits, cfg, penalty, lambda3_grid, freeze_outliers).run()

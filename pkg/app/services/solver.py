"""
MTLRRC estimator: modified ADMM and the block coordinate descent reference solver.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Optional

import numpy as np

from app.core.config import resolve_workers, settings
from app.core.exceptions import InvalidArgumentError
from app.models.data import MultiTaskData
from app.models.enums import SolverKind
from app.models.graph import TaskGraph
from app.models.params import FitResult, HyperParams, ModelParams, TaskCoef
from app.services import glm
from app.services.admm import FusedCentroidEngine
from app.services.clustering import extract_clusters, fusion_subgradient_residual
from app.services.penalty import envelope_rows, penalty_value_rows, psi, psi_rows, threshold_rows
from app.services.taskgraph import fused_norm


def _check_inputs(data: MultiTaskData, graph: TaskGraph) -> None:
    if graph.n_tasks != data.n_tasks:
        raise InvalidArgumentError(f"graph has {graph.n_tasks} tasks, data has {data.n_tasks}")


def _frozen(hp: HyperParams) -> HyperParams:
    """Pin O at zero: an infinite outlier threshold makes every thresholding map return 0."""
    return hp.model_copy(update={"penalty": hp.penalty.with_lambda(math.inf)})


def _outlier_step(W: np.ndarray, U: np.ndarray, hp: HyperParams) -> np.ndarray:
    return threshold_rows(W - U, hp.outlier_threshold)


def initial_params(
    data: MultiTaskData, graph: TaskGraph, stl: Optional[tuple[np.ndarray, np.ndarray]] = None
) -> ModelParams:
    """
    Warm start at the single-task estimates: ``W = U = W_stl``, ``O = 0``, ``S = 0``.
    """
    _check_inputs(data, graph)
    w0, W = stl if stl is not None else glm.fit_stl(data)
    W = np.array(W, dtype=float, copy=True)
    return ModelParams(
        w0=np.array(w0, dtype=float, copy=True),
        W=W,
        U=W.copy(),
        O=np.zeros_like(W),
        S=np.zeros((graph.n_edges, data.n_features)),
    )


def mtlrrc_objective(data: MultiTaskData, params: ModelParams, graph: TaskGraph, hp: HyperParams) -> float:
    """
    Objective with O minimised out:
    ``sum_m L_m/n_m + lambda1 sum_m envelope(w_m - u_m; lambda3/lambda1) + lambda2 fused_norm(U)``.
    """
    total = _loss_term(data, params)
    if hp.lambda1 > 0:
        total += hp.lambda1 * float(np.sum(envelope_rows(params.W - params.U, hp.outlier_threshold)))
    return total + hp.lambda2 * fused_norm(params.U, graph)


def explicit_objective(data: MultiTaskData, params: ModelParams, graph: TaskGraph, hp: HyperParams) -> float:
    """
    Objective with O explicit:
    ``sum_m L_m/n_m + (lambda1/2)||W - U - O||^2 + lambda2 fused_norm(U) + lambda1 sum_m P(o_m; lambda3/lambda1)``.

    Not defined for multivariate Tukey, which has no closed-form penalty.
    """
    total = _loss_term(data, params)
    total += 0.5 * hp.lambda1 * float(np.sum((params.W - params.U - params.O) ** 2))
    total += hp.lambda2 * fused_norm(params.U, graph)
    if hp.lambda1 > 0:
        total += hp.lambda1 * float(np.sum(penalty_value_rows(params.O, hp.outlier_threshold)))
    return total


def _loss_term(data: MultiTaskData, params: ModelParams) -> float:
    return sum(
        glm.loss(task, TaskCoef(intercept=params.w0[m], coef=params.W[m])) / task.n_samples
        for m, task in enumerate(data)
    )


def check_stationarity_mtlrrc(
    data: MultiTaskData, params: ModelParams, graph: TaskGraph, hp: HyperParams
) -> tuple[float, float]:
    """
    Stationarity residuals of a fitted point.

    Returns:
        Tuple of (regression residual, clustering residual). The regression residual is
        the largest sup-norm over tasks of ``d/dw' L_m/n_m + lambda1 (0, psi(w_m - u_m))``;
        the clustering residual is the best fused-norm subgradient residual of
        ``-lambda1 Psi(W - U) + lambda2 d||D vec(U)||_{2,1}``.
    """
    _check_inputs(data, graph)
    spec = hp.outlier_threshold
    regression = 0.0
    for m, task in enumerate(data):
        coef = TaskCoef(intercept=params.w0[m], coef=params.W[m])
        grad = glm.gradient(task, coef) / task.n_samples
        grad[1:] += hp.lambda1 * psi(params.W[m] - params.U[m], spec)
        regression = max(regression, float(np.max(np.abs(grad))))

    G = -hp.lambda1 * psi_rows(params.W - params.U, spec)
    clustering = fusion_subgradient_residual(G, params.U, graph, hp.lambda2)
    return regression, clustering


class MTLRRCSolver:
    """
    Fits MTLRRC on one dataset and graph.

    The W-step runs one Newton-Raphson solve per task, in a thread pool when
    ``workers > 1``; results are collected by task index.
    """

    def __init__(
        self,
        data: MultiTaskData,
        graph: TaskGraph,
        hp: HyperParams,
        tol: Optional[float] = None,
        max_outer: Optional[int] = None,
        max_fista: Optional[int] = None,
        freeze_outliers: bool = False,
        workers: Optional[int] = 1,
    ):
        _check_inputs(data, graph)
        self.logger = logging.getLogger("mtlrrc.MTLRRCSolver")
        self.data = data
        self.graph = graph
        self.hp = _frozen(hp) if freeze_outliers else hp
        self.tol = settings.OUTER_TOL if tol is None else tol
        self.max_outer = settings.MAX_OUTER if max_outer is None else max_outer
        self.workers = resolve_workers(workers)
        self.engine = FusedCentroidEngine(graph, nu=self.hp.nu, max_fista=max_fista)

    def _solve_task(self, m: int, params: ModelParams) -> TaskCoef:
        return glm.newton_raphson(
            self.data[m],
            params.U[m],
            params.O[m],
            self.hp.lambda1,
            init=TaskCoef(intercept=params.w0[m], coef=params.W[m]),
            task=m,
        )

    def _weight_step(self, params: ModelParams) -> tuple[np.ndarray, np.ndarray]:
        tasks = range(self.data.n_tasks)
        if self.workers > 1 and self.data.n_tasks > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                coefs = list(pool.map(lambda m: self._solve_task(m, params), tasks))
        else:
            coefs = [self._solve_task(m, params) for m in tasks]
        w0 = np.array([c.intercept for c in coefs])
        W = np.vstack([c.coef for c in coefs])
        return w0, W

    def _finish(self, params: ModelParams, solver: SolverKind, trace: list[float], iters: int, converged: bool) -> FitResult:
        regression, clustering = check_stationarity_mtlrrc(self.data, params, self.graph, self.hp)
        outliers = tuple(int(m) for m in np.flatnonzero(np.any(params.O != 0, axis=1)))
        labels = extract_clusters(params.U, self.graph)
        self.logger.info(
            f"{solver.value} fit: lambda=({self.hp.lambda1:g}, {self.hp.lambda2:g}, {self.hp.lambda3:g}), "
            f"iters={iters}, objective={trace[-1] if trace else float('nan'):.8g}, "
            f"clusters={np.unique(labels).size}, outliers={len(outliers)}"
        )
        return FitResult(
            params=params,
            hyperparams=self.hp,
            solver=solver,
            objective_trace=trace,
            outer_iters=iters,
            converged=converged,
            regression_residual=regression,
            clustering_residual=clustering,
            outlier_tasks=outliers,
            cluster_labels=labels,
        )

    def fit_admm(self, init: Optional[ModelParams] = None) -> FitResult:
        """
        Modified ADMM: W-step, FISTA U-step, O-step, dual S-step.

        Stops when the relative change of ``(w0, W)`` and the primal residual
        ``||S_new - S||_inf / nu`` both fall below ``tol``. Hitting ``max_outer`` logs a
        warning and marks the result as not converged.
        """
        hp = self.hp
        params = (init or initial_params(self.data, self.graph)).copy()
        trace: list[float] = []
        for iteration in range(1, self.max_outer + 1):
            w0, W = self._weight_step(params)
            U, _ = self.engine.fista(W - params.O, params.S, params.U, hp.lambda1, hp.lambda2)
            O = _outlier_step(W, U, hp)
            S = self.engine.dual_prox(params.S, U, hp.lambda2)

            old = np.column_stack([params.w0, params.W])
            new = np.column_stack([w0, W])
            w_change = float(np.linalg.norm(new - old)) / (1.0 + float(np.linalg.norm(old)))
            primal = float(np.max(np.abs(S - params.S))) / hp.nu if S.size else 0.0
            s_scale = 1.0 + (float(np.max(np.abs(S))) if S.size else 0.0)

            params = ModelParams(w0=w0, W=W, U=U, O=O, S=S)
            trace.append(mtlrrc_objective(self.data, params, self.graph, hp))
            self.logger.debug(
                f"ADMM iteration {iteration}: objective={trace[-1]:.10g}, dW={w_change:.3g}, primal={primal:.3g}"
            )
            if w_change <= self.tol and primal <= self.tol * s_scale:
                return self._finish(params, SolverKind.ADMM, trace, iteration, True)

        self.logger.warning(f"ADMM reached max_outer={self.max_outer} without converging")
        return self._finish(params, SolverKind.ADMM, trace, self.max_outer, False)

    def fit_bcd(self, init: Optional[ModelParams] = None) -> FitResult:
        """
        Block coordinate descent: exact minimisation over ``(w0, W)``, then U (full
        fused-centroid ADMM), then O.
        """
        hp = self.hp
        params = (init or initial_params(self.data, self.graph)).copy()
        trace: list[float] = []
        for sweep in range(1, self.max_outer + 1):
            w0, W = self._weight_step(params)
            solution = self.engine.solve(
                W - params.O, hp.lambda1, hp.lambda2, U0=params.U, S0=params.S, tol=self.tol * 0.1
            )
            U = solution.U
            O = _outlier_step(W, U, hp)

            change = max(
                float(np.max(np.abs(w0 - params.w0))) if w0.size else 0.0,
                float(np.max(np.abs(W - params.W))),
                float(np.max(np.abs(U - params.U))),
                float(np.max(np.abs(O - params.O))),
            )
            params = ModelParams(w0=w0, W=W, U=U, O=O, S=solution.S)
            trace.append(mtlrrc_objective(self.data, params, self.graph, hp))
            self.logger.debug(f"BCD sweep {sweep}: objective={trace[-1]:.10g}, change={change:.3g}")
            if change <= self.tol:
                return self._finish(params, SolverKind.BCD, trace, sweep, True)

        self.logger.warning(f"BCD reached max_sweeps={self.max_outer} without converging")
        return self._finish(params, SolverKind.BCD, trace, self.max_outer, False)


def fit_admm(
    data: MultiTaskData,
    graph: TaskGraph,
    hp: HyperParams,
    tol: Optional[float] = None,
    max_outer: Optional[int] = None,
    max_fista: Optional[int] = None,
    init: Optional[ModelParams] = None,
    freeze_outliers: bool = False,
    workers: Optional[int] = 1,
) -> FitResult:
    """Fit MTLRRC with the modified ADMM."""
    solver = MTLRRCSolver(
        data, graph, hp, tol=tol, max_outer=max_outer, max_fista=max_fista, freeze_outliers=freeze_outliers, workers=workers
    )
    return solver.fit_admm(init)


def fit_bcd(
    data: MultiTaskData,
    graph: TaskGraph,
    hp: HyperParams,
    tol: Optional[float] = None,
    max_sweeps: Optional[int] = None,
    init: Optional[ModelParams] = None,
    freeze_outliers: bool = False,
    workers: Optional[int] = 1,
) -> FitResult:
    """Fit MTLRRC by block coordinate descent."""
    solver = MTLRRCSolver(data, graph, hp, tol=tol, max_outer=max_sweeps, freeze_outliers=freeze_outliers, workers=workers)
    return solver.fit_bcd(init)


def fit(
    data: MultiTaskData,
    graph: TaskGraph,
    hp: HyperParams,
    solver: SolverKind = SolverKind.ADMM,
    **kwargs,
) -> FitResult:
    """Dispatch to :func:`fit_admm` or :func:`fit_bcd`."""
    if SolverKind(solver) == SolverKind.BCD:
        if "max_outer" in kwargs:
            kwargs["max_sweeps"] = kwargs.pop("max_outer")
        kwargs.pop("max_fista", None)
        return fit_bcd(data, graph, hp, **kwargs)
    return fit_admm(data, graph, hp, **kwargs)

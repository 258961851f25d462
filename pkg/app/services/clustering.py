"""
Robust regularized clustering of the rows of a data matrix by block coordinate descent.

    min_{U, O} 1/2 sum_i ||x_i - u_i - o_i||^2 + lambda1 sum_E r ||u_i1 - u_i2|| + sum_i P(o_i)
"""

import logging
from typing import Optional

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from app.core.config import settings
from app.core.exceptions import ConvergenceError, InvalidArgumentError
from app.models.enums import PenaltyFamily
from app.models.graph import TaskGraph
from app.models.params import RccState
from app.models.penalty import PenaltySpec
from app.services.admm import FusedCentroidEngine
from app.services.penalty import envelope_rows, penalty_value_rows, psi_rows, threshold_rows
from app.services.taskgraph import apply_incidence, apply_incidence_transpose, fused_norm

logger = logging.getLogger(__name__)

_PROJECTION_STEPS = 200


def fused_edges(U: np.ndarray, graph: TaskGraph, tol: Optional[float] = None) -> np.ndarray:
    """Boolean mask of edges with ``||u_m1 - u_m2|| <= tol (1 + ||u_m1||)``."""
    tol = settings.CLUSTER_FUSION_TOL if tol is None else tol
    if graph.n_edges == 0:
        return np.zeros(0, dtype=bool)
    gaps = np.linalg.norm(apply_incidence(U, graph), axis=1)
    return gaps <= tol * (1.0 + np.linalg.norm(U[graph.heads], axis=1))


def extract_clusters(U: np.ndarray, graph: TaskGraph, tol: Optional[float] = None) -> np.ndarray:
    """
    Cluster labels: connected components of the fused edges.

    Labels are numbered 0, 1, ... in order of the first task of each component.
    """
    U = np.asarray(U, dtype=float)
    mask = fused_edges(U, graph, tol)
    T = graph.n_tasks
    adjacency = sparse.coo_matrix(
        (np.ones(int(mask.sum())), (graph.heads[mask], graph.tails[mask])), shape=(T, T)
    )
    _, labels = connected_components(adjacency, directed=False)
    # renumber by first appearance
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty_like(order)
    remap[order] = np.arange(order.size)
    return remap[labels].astype(int)


def rrc_objective(
    X: np.ndarray, U: np.ndarray, O: np.ndarray, graph: TaskGraph, lambda1: float, penalty: PenaltySpec
) -> float:
    """
    Robust regularized clustering objective with O explicit.

    Multivariate Tukey has no closed-form penalty, so for it the profiled objective
    :func:`profiled_rrc_objective` is returned instead.
    """
    if penalty.family == PenaltyFamily.MULTI_TUKEY:
        return profiled_rrc_objective(X, U, graph, lambda1, penalty)
    fit = 0.5 * float(np.sum((X - U - O) ** 2))
    return fit + lambda1 * fused_norm(U, graph) + float(np.sum(penalty_value_rows(O, penalty)))


def profiled_rrc_objective(X: np.ndarray, U: np.ndarray, graph: TaskGraph, lambda1: float, penalty: PenaltySpec) -> float:
    """``sum_i envelope(x_i - u_i) + lambda1 fused_norm(U)``, the objective minimised over O."""
    return float(np.sum(envelope_rows(X - U, penalty))) + lambda1 * fused_norm(U, graph)


def fusion_subgradient_residual(
    G: np.ndarray, U: np.ndarray, graph: TaskGraph, scale: float, tol: Optional[float] = None
) -> float:
    """
    Smallest sup-norm of ``G + scale * A_E^T Z`` over subgradients ``Z`` of the weighted fused norm.

    Rows of ``Z`` on separated edges are ``r_e`` times the unit difference direction. On
    fused edges they are free within the ball of radius ``r_e``: the least-norm solution
    per column is projected onto the balls and refined by projected gradient steps.
    """
    G = np.asarray(G, dtype=float)
    if scale == 0 or graph.n_edges == 0:
        return float(np.max(np.abs(G))) if G.size else 0.0

    fused = fused_edges(U, graph, tol)
    diffs = apply_incidence(U, graph)
    norms = np.linalg.norm(diffs, axis=1)
    weights = graph.weight_array

    Z = np.zeros_like(diffs)
    separated = ~fused
    Z[separated] = weights[separated, None] * diffs[separated] / norms[separated, None]
    base = G + scale * apply_incidence_transpose(Z, graph)
    if not fused.any():
        return float(np.max(np.abs(base)))

    A_f = np.zeros((int(fused.sum()), graph.n_tasks))
    rows = np.arange(A_f.shape[0])
    A_f[rows, graph.heads[fused]] = 1.0
    A_f[rows, graph.tails[fused]] = -1.0
    radii = weights[fused]

    def project(Zf: np.ndarray) -> np.ndarray:
        norms_f = np.linalg.norm(Zf, axis=1)
        factor = np.where(norms_f > radii, radii / np.where(norms_f > 0, norms_f, 1.0), 1.0)
        return Zf * factor[:, None]

    Zf, *_ = np.linalg.lstsq(scale * A_f.T, -base, rcond=None)
    Zf = project(Zf)
    best = float(np.max(np.abs(base)))
    lipschitz = scale**2 * max(np.linalg.norm(A_f, 2) ** 2, 1e-12)
    for _ in range(_PROJECTION_STEPS):
        residual = base + scale * A_f.T @ Zf
        best = min(best, float(np.max(np.abs(residual))))
        Zf = project(Zf - scale * (A_f @ residual) / lipschitz)
    residual = base + scale * A_f.T @ Zf
    return min(best, float(np.max(np.abs(residual))))


def solve_rrc(
    X: np.ndarray,
    graph: TaskGraph,
    lambda1: float,
    penalty: PenaltySpec,
    tol: Optional[float] = None,
    max_sweeps: Optional[int] = None,
    engine: Optional[FusedCentroidEngine] = None,
) -> RccState:
    """
    Block coordinate descent: a convex-clustering U-step on ``X - O`` followed by the
    row-wise O-step ``o_i <- threshold(x_i - u_i)``.

    Args:
        X: n x p data matrix
        graph: graph over the n rows
        lambda1: fusion weight
        penalty: outlier penalty; its lambda is the outlier threshold
        tol: sup-norm change of U and O declaring convergence
        max_sweeps: sweep cap
        engine: fused-centroid engine, built from ``graph`` when omitted

    Returns:
        RccState with the objective trace and cluster labels

    Raises:
        ConvergenceError: ``max_sweeps`` reached, trace attached
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != graph.n_tasks:
        raise InvalidArgumentError(f"X must have {graph.n_tasks} rows")
    if not np.all(np.isfinite(X)):
        raise InvalidArgumentError("X must be finite")
    if lambda1 < 0:
        raise InvalidArgumentError("lambda1 must be non-negative")
    tol = settings.RRC_TOL if tol is None else tol
    max_sweeps = settings.RRC_MAX_SWEEPS if max_sweeps is None else max_sweeps
    engine = engine or FusedCentroidEngine(graph)

    U = X.copy()
    O = np.zeros_like(X)
    S = engine.zero_duals(X.shape[1])
    trace: list[float] = []
    for sweep in range(1, max_sweeps + 1):
        solution = engine.solve(X - O, 1.0, lambda1, U0=U, S0=S, tol=tol * 0.1)
        U_next, S = solution.U, solution.S
        O_next = threshold_rows(X - U_next, penalty)
        trace.append(rrc_objective(X, U_next, O_next, graph, lambda1, penalty))
        change = max(float(np.max(np.abs(U_next - U))), float(np.max(np.abs(O_next - O))))
        U, O = U_next, O_next
        logger.debug(f"RRC sweep {sweep}: objective={trace[-1]:.10g}, change={change:.3g}")
        if change <= tol:
            return RccState(U=U, O=O, objective_trace=trace, sweeps=sweep, cluster_labels=extract_clusters(U, graph))

    raise ConvergenceError(
        "robust regularized clustering did not converge",
        iterations=max_sweeps,
        last_iterate=RccState(U=U, O=O, objective_trace=trace, sweeps=max_sweeps),
        trace=trace,
    )


def check_stationarity_rrc(
    X: np.ndarray, state: RccState, graph: TaskGraph, lambda1: float, penalty: PenaltySpec
) -> float:
    """
    Residual of ``-Psi(X - U) + lambda1 d||D vec(U)||_{2,1} = 0`` at a converged state.

    Returns:
        Sup-norm of the residual for the best admissible subgradient
    """
    X = np.asarray(X, dtype=float)
    G = -psi_rows(X - state.U, penalty)
    return fusion_subgradient_residual(G, state.U, graph, lambda1)

"""
k-NN task graph construction and the incidence / fused-norm operators on it.
"""

import logging
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.spatial.distance import cdist

from app.core.exceptions import InvalidArgumentError
from app.models.graph import TaskGraph

logger = logging.getLogger(__name__)


def knn_weights(coefs: np.ndarray, k: int) -> TaskGraph:
    """
    Build the symmetric k-NN weight graph ``R = (S^T + S) / 2``.

    ``S[m1, m2] = 1`` iff row ``m1`` is among the ``k`` nearest rows (Euclidean) of row
    ``m2``, the row itself excluded. Distance ties go to the lower task index.

    Args:
        coefs: T x p matrix of single-task coefficients (no intercepts)
        k: number of neighbours, ``1 <= k < T``

    Returns:
        TaskGraph carrying weights in {0.5, 1}
    """
    coefs = np.asarray(coefs, dtype=float)
    if coefs.ndim != 2:
        raise InvalidArgumentError("coefs must be a T x p matrix")
    if not np.all(np.isfinite(coefs)):
        raise InvalidArgumentError("coefs must be finite")
    T = coefs.shape[0]
    if k < 1 or k >= T:
        raise InvalidArgumentError(f"k must satisfy 1 <= k < T (k={k}, T={T})")

    dist = cdist(coefs, coefs)
    np.fill_diagonal(dist, np.inf)
    S = np.zeros((T, T))
    for m2 in range(T):
        # stable sort keeps equal distances in index order
        nearest = np.argsort(dist[:, m2], kind="stable")[:k]
        S[nearest, m2] = 1.0
    R = (S.T + S) / 2.0

    m1s, m2s = np.nonzero(np.triu(R, k=1))
    edges = tuple((int(a), int(b)) for a, b in zip(m1s, m2s))
    weights = tuple(float(R[a, b]) for a, b in edges)
    logger.debug(f"k-NN graph: T={T}, k={k}, |E|={len(edges)}")
    return TaskGraph(n_tasks=T, edges=edges, weights=weights, k=k)


def _check_rows(U: np.ndarray, graph: TaskGraph) -> np.ndarray:
    U = np.asarray(U, dtype=float)
    if U.ndim != 2 or U.shape[0] != graph.n_tasks:
        raise InvalidArgumentError(f"expected a matrix with {graph.n_tasks} rows, got shape {U.shape}")
    return U


def apply_incidence(U: np.ndarray, graph: TaskGraph) -> np.ndarray:
    """``A_E U``: row ``(m1, m2)`` is ``u_m1 - u_m2``."""
    U = _check_rows(U, graph)
    return U[graph.heads] - U[graph.tails]


def apply_incidence_transpose(F: np.ndarray, graph: TaskGraph) -> np.ndarray:
    """``A_E^T F``: scatters ``+f`` onto ``m1`` and ``-f`` onto ``m2``."""
    F = np.asarray(F, dtype=float)
    if F.ndim != 2 or F.shape[0] != graph.n_edges:
        raise InvalidArgumentError(f"expected a matrix with {graph.n_edges} rows, got shape {F.shape}")
    out = np.zeros((graph.n_tasks, F.shape[1]))
    np.add.at(out, graph.heads, F)
    np.subtract.at(out, graph.tails, F)
    return out


def fused_norm(U: np.ndarray, graph: TaskGraph) -> float:
    """Weighted mixed (2,1)-norm ``sum_E r ||u_m1 - u_m2||``."""
    if graph.n_edges == 0:
        _check_rows(U, graph)
        return 0.0
    diffs = apply_incidence(U, graph)
    return float(np.sum(graph.weight_array * np.linalg.norm(diffs, axis=1)))


def degrees(graph: TaskGraph) -> np.ndarray:
    """Unweighted degree of every task, the diagonal of ``A_E^T A_E``."""
    deg = np.zeros(graph.n_tasks, dtype=int)
    np.add.at(deg, graph.heads, 1)
    np.add.at(deg, graph.tails, 1)
    return deg


def lipschitz_step(graph: TaskGraph, lambda1: float, nu: float = 1.0) -> float:
    """
    FISTA step size ``1 / (lambda1 + 2 nu max_i (A_E^T A_E)_ii)``.
    """
    if lambda1 < 0:
        raise InvalidArgumentError("lambda1 must be non-negative")
    max_degree = int(degrees(graph).max()) if graph.n_edges else 0
    curvature = lambda1 + 2.0 * nu * max_degree
    if curvature <= 0:
        raise InvalidArgumentError("step size undefined for lambda1 = 0 on a graph without edges")
    return 1.0 / curvature


def incidence_matrix(graph: TaskGraph) -> np.ndarray:
    """Dense |E| x T signed incidence matrix."""
    A = np.zeros((graph.n_edges, graph.n_tasks))
    rows = np.arange(graph.n_edges)
    A[rows, graph.heads] = 1.0
    A[rows, graph.tails] = -1.0
    return A


def difference_operator(graph: TaskGraph, p: int) -> sparse.csr_matrix:
    """``D = A_r kron I_p`` acting on ``vec(U)`` with U stacked row by row."""
    A_r = sparse.csr_matrix(incidence_matrix(graph) * graph.weight_array[:, None]) if graph.n_edges else (
        sparse.csr_matrix((0, graph.n_tasks))
    )
    return sparse.kron(A_r, sparse.identity(p), format="csr")


def graph_to_frame(graph: TaskGraph) -> pd.DataFrame:
    """Edge list with columns ``m1, m2, weight`` (0-based task indices)."""
    return pd.DataFrame(
        {
            "m1": graph.heads,
            "m2": graph.tails,
            "weight": graph.weight_array,
        }
    )


def export_graph(graph: TaskGraph, path: Path) -> None:
    """Write the edge list CSV."""
    graph_to_frame(graph).to_csv(path, index=False)

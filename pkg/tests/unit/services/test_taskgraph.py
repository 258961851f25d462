"""
Tests for the k-NN task graph and its operators.
"""

import numpy as np
import pytest

from app.core.exceptions import InvalidArgumentError
from app.models.graph import TaskGraph
from app.services.taskgraph import (
    apply_incidence,
    apply_incidence_transpose,
    degrees,
    difference_operator,
    fused_norm,
    graph_to_frame,
    incidence_matrix,
    knn_weights,
    lipschitz_step,
)
from tests.conftest import complete_graph


class TestKnnWeights:
    """Tests for knn_weights."""

    def test_one_nearest_neighbour_on_a_line(self):
        """Test the weights on three points 0, 1, 3 with k = 1."""
        graph = knn_weights(np.array([[0.0], [1.0], [3.0]]), 1)
        assert dict(zip(graph.edges, graph.weights)) == {(0, 1): 1.0, (1, 2): 0.5}
        assert graph.k == 1

    def test_ties_go_to_lower_index(self):
        """Test that equidistant neighbours are broken by index."""
        graph = knn_weights(np.array([[0.0], [-1.0], [1.0]]), 1)
        # task 0 picks task 1 over task 2; tasks 1 and 2 both pick task 0
        assert dict(zip(graph.edges, graph.weights)) == {(0, 1): 1.0, (0, 2): 0.5}

    def test_complete_graph(self, rng):
        """Test that k = T - 1 connects every pair with weight 1."""
        graph = knn_weights(rng.standard_normal((5, 3)), 4)
        assert graph.n_edges == 10
        assert set(graph.weights) == {1.0}

    def test_weights_symmetric_and_bounded(self, rng):
        """Test that every weight is 0.5 or 1 and each task has at least k neighbours."""
        coefs = rng.standard_normal((12, 4))
        graph = knn_weights(coefs, 3)
        assert set(graph.weights) <= {0.5, 1.0}
        assert np.all(degrees(graph) >= 3)

    def test_invalid_k(self, rng):
        """Test that k outside [1, T) is rejected."""
        coefs = rng.standard_normal((4, 2))
        with pytest.raises(InvalidArgumentError):
            knn_weights(coefs, 0)
        with pytest.raises(InvalidArgumentError):
            knn_weights(coefs, 4)

    def test_relabeling_equivariance(self, rng):
        """Test that permuting the tasks permutes the graph and nothing else."""
        coefs = rng.standard_normal((10, 3))
        graph = knn_weights(coefs, 3)
        for _ in range(5):
            perm = rng.permutation(10)
            permuted = knn_weights(coefs[perm], 3)
            relabeled = {
                (min(perm[a], perm[b]), max(perm[a], perm[b])): w for (a, b), w in zip(permuted.edges, permuted.weights)
            }
            assert relabeled == dict(zip(graph.edges, graph.weights))

    def test_non_finite_coefficients(self):
        """Test that NaN coefficients are rejected."""
        with pytest.raises(InvalidArgumentError):
            knn_weights(np.array([[0.0], [np.nan], [1.0]]), 1)


class TestTaskGraph:
    """Tests for the TaskGraph model."""

    def test_from_edges_normalises_pairs(self):
        """Test that pairs are sorted and zero weights dropped."""
        graph = TaskGraph.from_edges(3, {(2, 0): 0.5, (1, 0): 1.0, (1, 2): 0.0})
        assert graph.edges == ((0, 1), (0, 2))
        assert graph.weights == (1.0, 0.5)

    def test_rejects_self_loop(self):
        """Test that self-loops are rejected."""
        with pytest.raises(ValueError):
            TaskGraph.from_edges(2, {(1, 1): 1.0})

    def test_rejects_out_of_range_edge(self):
        """Test that edges must reference existing tasks."""
        with pytest.raises(ValueError):
            TaskGraph(n_tasks=2, edges=((0, 2),), weights=(1.0,))


class TestOperators:
    """Tests for the incidence operators and the fused norm."""

    def test_incidence_adjoint(self, rng):
        """Test <A U, F> = <U, A^T F>."""
        graph = complete_graph(4)
        U = rng.standard_normal((4, 3))
        F = rng.standard_normal((graph.n_edges, 3))
        lhs = np.sum(apply_incidence(U, graph) * F)
        rhs = np.sum(U * apply_incidence_transpose(F, graph))
        assert lhs == pytest.approx(rhs)

    def test_incidence_matches_dense_matrix(self, rng):
        """Test the operator against the dense incidence matrix."""
        graph = knn_weights(rng.standard_normal((6, 2)), 2)
        U = rng.standard_normal((6, 2))
        np.testing.assert_allclose(apply_incidence(U, graph), incidence_matrix(graph) @ U)

    def test_fused_norm_matches_kronecker_operator(self, rng):
        """Test sum_E r ||u_m1 - u_m2|| against the D = A_r kron I form."""
        graph = knn_weights(rng.standard_normal((7, 3)), 2)
        U = rng.standard_normal((7, 3))
        blocks = (difference_operator(graph, 3) @ U.reshape(-1)).reshape(graph.n_edges, 3)
        assert fused_norm(U, graph) == pytest.approx(float(np.sum(np.linalg.norm(blocks, axis=1))))

    def test_fused_norm_without_edges(self):
        """Test that a graph without edges has zero fused norm."""
        assert fused_norm(np.ones((3, 2)), TaskGraph(n_tasks=3)) == 0.0

    def test_row_count_checked(self):
        """Test that a matrix with the wrong row count is rejected."""
        with pytest.raises(InvalidArgumentError):
            apply_incidence(np.ones((2, 2)), complete_graph(3))


class TestLipschitzStep:
    """Tests for lipschitz_step."""

    def test_path_graph(self):
        """Test 1 / (lambda1 + 2 nu maxdeg) on a path with maximum degree 2."""
        graph = TaskGraph.from_edges(3, {(0, 1): 1.0, (1, 2): 1.0})
        assert lipschitz_step(graph, 1.0) == pytest.approx(0.2)
        assert lipschitz_step(graph, 1.0, nu=2.0) == pytest.approx(1.0 / 9.0)

    def test_no_edges(self):
        """Test that an empty graph gives step 1 / lambda1 and fails at lambda1 = 0."""
        graph = TaskGraph(n_tasks=2)
        assert lipschitz_step(graph, 4.0) == pytest.approx(0.25)
        with pytest.raises(InvalidArgumentError):
            lipschitz_step(graph, 0.0)


class TestGraphFrame:
    """Tests for the edge-list export."""

    def test_columns(self):
        """Test the edge-list columns."""
        frame = graph_to_frame(TaskGraph.from_edges(3, {(0, 1): 1.0, (1, 2): 0.5}))
        assert list(frame.columns) == ["m1", "m2", "weight"]
        assert frame["weight"].tolist() == [1.0, 0.5]

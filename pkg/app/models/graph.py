"""
Task graph model: weighted edge set over T tasks.
"""

from functools import cached_property

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator


class TaskGraph(BaseModel):
    """
    Undirected weighted graph over ``n_tasks`` tasks.

    Edges are stored as pairs ``(m1, m2)`` with ``m1 < m2`` in lexicographic order;
    rows of every |E| x p matrix (incidence products, ADMM multipliers) follow that order.
    Only positive weights are stored.
    """

    model_config = ConfigDict(frozen=True, ignored_types=(cached_property,))

    n_tasks: int
    edges: tuple[tuple[int, int], ...] = ()
    weights: tuple[float, ...] = ()
    k: int | None = None

    @model_validator(mode="after")
    def validate_edges(self):
        if self.n_tasks < 1:
            raise ValueError("a task graph needs at least one task")
        if len(self.edges) != len(self.weights):
            raise ValueError("edges and weights must have equal length")
        if list(self.edges) != sorted(set(self.edges)):
            raise ValueError("edges must be unique and sorted lexicographically")
        for (m1, m2), weight in zip(self.edges, self.weights):
            if not 0 <= m1 < m2 < self.n_tasks:
                raise ValueError(f"invalid edge ({m1}, {m2})")
            if not weight > 0:
                raise ValueError(f"edge ({m1}, {m2}) has non-positive weight {weight}")
        return self

    @classmethod
    def from_edges(cls, n_tasks: int, weighted_edges: dict[tuple[int, int], float], k: int | None = None) -> "TaskGraph":
        """Build a graph from ``{(a, b): weight}``; pairs are normalised to ``a < b``."""
        normalised: dict[tuple[int, int], float] = {}
        for (a, b), weight in weighted_edges.items():
            if a == b:
                raise ValueError("self-loops are not allowed")
            normalised[(min(a, b), max(a, b))] = float(weight)
        ordered = sorted((edge, w) for edge, w in normalised.items() if w > 0)
        return cls(
            n_tasks=n_tasks,
            edges=tuple(edge for edge, _ in ordered),
            weights=tuple(w for _, w in ordered),
            k=k,
        )

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @cached_property
    def heads(self) -> np.ndarray:
        """First endpoint of every edge."""
        return np.array([e[0] for e in self.edges], dtype=int)

    @cached_property
    def tails(self) -> np.ndarray:
        """Second endpoint of every edge."""
        return np.array([e[1] for e in self.edges], dtype=int)

    @cached_property
    def weight_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

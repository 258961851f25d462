"""
Pytest configuration and fixtures for the MTLRRC tests.
"""

import os
import sys

import numpy as np
import pytest

# Add the project root directory to the Python path
project_root = os.path.abspath(os.path.join(os.path.dirname(__file__), ".."))
sys.path.insert(0, project_root)

from app.models.data import MultiTaskData, TaskDataset
from app.models.enums import GLMFamily, OutlierCase
from app.models.graph import TaskGraph
from app.models.simulation import SimConfig


def make_tasks(W: np.ndarray, n: int, rng: np.random.Generator, noise: float = 0.1) -> MultiTaskData:
    """Gaussian tasks ``y = X w_m + noise`` with standard normal designs."""
    tasks = []
    for m, w in enumerate(W):
        X = rng.standard_normal((n, W.shape[1]))
        y = X @ w + noise * rng.standard_normal(n)
        tasks.append(TaskDataset(X=X, y=y, family=GLMFamily.GAUSSIAN, name=f"task_{m}"))
    return MultiTaskData(tasks=tuple(tasks))


def make_bernoulli_tasks(W: np.ndarray, n: int, rng: np.random.Generator, intercept: float = 0.3) -> MultiTaskData:
    """Logistic tasks with a shared intercept; both classes are always present."""
    tasks = []
    for m, w in enumerate(W):
        X = rng.standard_normal((n, W.shape[1]))
        prob = 1.0 / (1.0 + np.exp(-(intercept + X @ w)))
        y = (rng.random(n) < prob).astype(float)
        y[0], y[1] = 0.0, 1.0
        tasks.append(TaskDataset(X=X, y=y, family=GLMFamily.BERNOULLI, name=f"task_{m}"))
    return MultiTaskData(tasks=tuple(tasks))


def random_tasks(seed: int, family: GLMFamily = GLMFamily.GAUSSIAN) -> MultiTaskData:
    """Small random instance: 3-6 tasks, 1-3 features, 20-40 samples per task."""
    rng = np.random.default_rng(seed)
    T, p, n = int(rng.integers(3, 7)), int(rng.integers(1, 4)), int(rng.integers(20, 41))
    W = rng.normal(0.0, 2.0, size=(T, p))
    if family == GLMFamily.BERNOULLI:
        return make_bernoulli_tasks(0.5 * W, n, rng)
    return make_tasks(W, n, rng, noise=0.5)


def complete_graph(n_tasks: int) -> TaskGraph:
    return TaskGraph.from_edges(n_tasks, {(a, b): 1.0 for a in range(n_tasks) for b in range(a + 1, n_tasks)})


@pytest.fixture
def rng() -> np.random.Generator:
    """
    Fixture providing a seeded random generator.
    """
    return np.random.default_rng(20240607)


@pytest.fixture
def two_cluster_data(rng) -> tuple[MultiTaskData, np.ndarray]:
    """
    Fixture providing four Gaussian tasks in two well separated clusters (no outliers).
    """
    W = np.array([[5.0, 5.0], [5.0, 5.0], [-5.0, -5.0], [-5.0, -5.0]])
    W = W + 0.05 * rng.standard_normal(W.shape)
    return make_tasks(W, 30, rng), W


@pytest.fixture
def small_gaussian_data(rng) -> MultiTaskData:
    """
    Fixture providing five small random Gaussian tasks.
    """
    W = rng.normal(0.0, 2.0, size=(5, 2))
    return make_tasks(W, 30, rng, noise=0.5)


@pytest.fixture
def small_bernoulli_data(rng) -> MultiTaskData:
    """
    Fixture providing four small logistic tasks.
    """
    W = rng.normal(0.0, 1.0, size=(4, 2))
    return make_bernoulli_tasks(W, 40, rng)


@pytest.fixture
def desk_sim_config() -> SimConfig:
    """
    Fixture providing a small simulation configuration.
    """
    return SimConfig(
        n_tasks=12,
        n_features=6,
        n_clusters=3,
        n_samples=45,
        sigma2=1.0,
        kappa=0.25,
        case=OutlierCase.CASE2,
        seed=7,
    )

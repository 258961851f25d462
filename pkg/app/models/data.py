"""
Task data containers.
"""

from typing import Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.enums import GLMFamily
from app.models.types import FloatArray


class TaskDataset(BaseModel):
    """
    One task: design matrix ``X`` (n x p), response ``y`` (n) and the GLM family.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    X: FloatArray
    y: FloatArray
    family: GLMFamily = GLMFamily.GAUSSIAN
    name: str | None = None

    @model_validator(mode="after")
    def validate_shapes(self):
        if self.X.ndim != 2:
            raise ValueError("X must be a 2-D array")
        if self.y.ndim != 1 or self.y.shape[0] != self.X.shape[0]:
            raise ValueError("y must be a vector with one entry per row of X")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise ValueError("task data must be finite")
        if self.family == GLMFamily.BERNOULLI and not np.all(np.isin(self.y, (0.0, 1.0))):
            raise ValueError("Bernoulli responses must be 0 or 1")
        return self

    @property
    def n_samples(self) -> int:
        return self.X.shape[0]

    @property
    def n_features(self) -> int:
        return self.X.shape[1]

    def take(self, index: np.ndarray) -> "TaskDataset":
        """Rows ``index`` of this task as a new dataset."""
        return TaskDataset(X=self.X[index], y=self.y[index], family=self.family, name=self.name)


class MultiTaskData(BaseModel):
    """
    T tasks sharing one feature schema and one GLM family.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    tasks: tuple[TaskDataset, ...]
    feature_names: tuple[str, ...] | None = None

    @model_validator(mode="after")
    def validate_tasks(self):
        if not self.tasks:
            raise ValueError("at least one task is required")
        p = self.tasks[0].n_features
        family = self.tasks[0].family
        for m, task in enumerate(self.tasks):
            if task.n_features != p:
                raise ValueError(f"task {m} has {task.n_features} features, expected {p}")
            if task.family != family:
                raise ValueError("all tasks must share one GLM family")
        if self.feature_names is not None and len(self.feature_names) != p:
            raise ValueError("feature_names does not match the number of features")
        return self

    @property
    def n_tasks(self) -> int:
        return len(self.tasks)

    @property
    def n_features(self) -> int:
        return self.tasks[0].n_features

    @property
    def family(self) -> GLMFamily:
        return self.tasks[0].family

    def subset(self, indices: Sequence[int]) -> "MultiTaskData":
        """The tasks at ``indices`` in the given order."""
        return MultiTaskData(tasks=tuple(self.tasks[i] for i in indices), feature_names=self.feature_names)

    def __len__(self) -> int:
        return self.n_tasks

    def __iter__(self):
        return iter(self.tasks)

    def __getitem__(self, index: int) -> TaskDataset:
        return self.tasks[index]


class DataSplits(BaseModel):
    """Train / validation / test views of the same tasks."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    train: MultiTaskData
    validation: MultiTaskData | None = None
    test: MultiTaskData | None = None
    indices: tuple[tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...]], ...] = Field(
        default=(), description="Per task (train, validation, test) row indices into the source data"
    )


class Standardization(BaseModel):
    """
    Per-task training statistics used to standardize features (and centre Gaussian responses).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    feature_mean: FloatArray
    feature_scale: FloatArray
    response_mean: FloatArray

    def coef_to_original(self, W: np.ndarray) -> np.ndarray:
        """Map standardized-scale coefficients (T x p) back to the raw feature scale."""
        return np.asarray(W, dtype=float) / self.feature_scale

    def intercept_to_original(self, w0: np.ndarray, W: np.ndarray) -> np.ndarray:
        """Raw-scale intercepts matching :meth:`coef_to_original`."""
        raw = self.coef_to_original(W)
        return np.asarray(w0, dtype=float) + self.response_mean - np.sum(self.feature_mean * raw, axis=1)

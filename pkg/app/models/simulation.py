"""
Synthetic-data configuration and ground truth.
"""

from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.enums import OutlierCase
from app.models.types import FloatArray, IntArray


class SimConfig(BaseModel):
    """
    Generator settings for cluster-structured tasks with planted outlier tasks.
    """

    model_config = ConfigDict(frozen=True)

    n_tasks: int = Field(default=150, ge=1, description="Number of tasks T")
    n_features: int = Field(default=100, ge=1, description="Number of features p")
    n_clusters: int = Field(default=3, ge=1, description="Number of true clusters C")
    n_samples: int = Field(default=200, ge=1, description="Samples per task n_m")
    sigma2: float = Field(default=5.0, ge=0.0, description="Noise variance")
    kappa: float = Field(default=0.0, ge=0.0, le=1.0, description="Probability that a task is an outlier")
    case: OutlierCase = OutlierCase.CASE2
    sigma_o2: float = Field(default=1.0, gt=0.0, description="Variance of the truncated normals (Case 1)")
    seed: int = 0

    @model_validator(mode="after")
    def validate_clusters(self):
        if self.n_tasks % self.n_clusters != 0:
            raise ValueError(f"n_tasks={self.n_tasks} is not divisible by n_clusters={self.n_clusters}")
        return self


class GroundTruth(BaseModel):
    """
    True coefficients and structure of a generated dataset.

    ``cluster_of`` and ``feature_cluster`` hold cluster ids in ``1..C``. In Case 2 an
    outlier task keeps its nominal cluster for bookkeeping only.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    W_true: FloatArray
    cluster_of: IntArray
    is_outlier: np.ndarray
    u_true: FloatArray
    feature_cluster: IntArray

    @property
    def outlier_tasks(self) -> tuple[int, ...]:
        return tuple(int(m) for m in np.flatnonzero(self.is_outlier))

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "W_true": self.W_true.tolist(),
            "cluster_of": self.cluster_of.tolist(),
            "is_outlier": [bool(v) for v in self.is_outlier],
            "u_true": self.u_true.tolist(),
            "feature_cluster": self.feature_cluster.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict[str, Any]) -> "GroundTruth":
        return cls(
            W_true=data["W_true"],
            cluster_of=data["cluster_of"],
            is_outlier=np.asarray(data["is_outlier"], dtype=bool),
            u_true=data["u_true"],
            feature_cluster=data["feature_cluster"],
        )

"""
Parameter, hyperparameter and result models for the MTLRRC solvers.
"""

import json
import math
from typing import Any

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.models.enums import PenaltyFamily, SolverKind
from app.models.penalty import PenaltySpec
from app.models.types import FloatArray, IntArray


class TaskCoef(BaseModel):
    """Intercept and coefficient vector of one task."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    intercept: float = 0.0
    coef: FloatArray

    @model_validator(mode="after")
    def validate_finite(self):
        if not (math.isfinite(self.intercept) and np.all(np.isfinite(self.coef))):
            raise ValueError("coefficients must be finite")
        return self


class HyperParams(BaseModel):
    """
    Regularization parameters of MTLRRC.

    ``penalty`` carries the family and gamma; its ``lam`` is lambda3.
    """

    model_config = ConfigDict(frozen=True)

    lambda1: float = Field(ge=0.0)
    lambda2: float = Field(ge=0.0)
    penalty: PenaltySpec
    nu: float = Field(default_factory=lambda: settings.DEFAULT_NU, gt=0.0)
    k: int = Field(default_factory=lambda: settings.DEFAULT_K, ge=1)

    @model_validator(mode="after")
    def validate_ratio(self):
        if self.lambda1 == 0.0 and 0.0 < self.lambda3 < math.inf:
            raise ValueError("lambda1 = 0 with lambda3 > 0 leaves the outlier threshold lambda3/lambda1 undefined")
        if not math.isfinite(self.lambda1) or not math.isfinite(self.lambda2):
            raise ValueError("lambda1 and lambda2 must be finite")
        return self

    @classmethod
    def build(
        cls,
        lambda1: float,
        lambda2: float,
        lambda3: float,
        family: PenaltyFamily = PenaltyFamily.GROUP_SCAD,
        gamma: float | None = None,
        **kwargs: Any,
    ) -> "HyperParams":
        return cls(
            lambda1=lambda1, lambda2=lambda2, penalty=PenaltySpec.default(family, lambda3, gamma), **kwargs
        )

    @property
    def lambda3(self) -> float:
        return self.penalty.lam

    @property
    def outlier_threshold(self) -> PenaltySpec:
        """
        The O-step thresholding spec with scale lambda3 / lambda1.

        With lambda1 = 0 the scale is 0 (O absorbs W - U) unless lambda3 is infinite,
        which keeps O pinned at zero.
        """
        if self.lambda1 == 0.0:
            return self.penalty.with_lambda(math.inf if math.isinf(self.lambda3) else 0.0)
        return self.penalty.with_lambda(self.lambda3 / self.lambda1)

    def key(self) -> tuple[float, float, float]:
        return self.lambda1, self.lambda2, self.lambda3


class ModelParams(BaseModel):
    """
    Intercepts ``w0`` (T), coefficients ``W``, centroids ``U``, outliers ``O`` (T x p)
    and the ADMM multipliers ``S`` (|E| x p, rows in graph edge order).
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    w0: FloatArray
    W: FloatArray
    U: FloatArray
    O: FloatArray
    S: FloatArray

    @model_validator(mode="after")
    def validate_shapes(self):
        T, p = self.W.shape
        if self.w0.shape != (T,):
            raise ValueError("w0 must have one entry per task")
        if self.U.shape != (T, p) or self.O.shape != (T, p):
            raise ValueError("W, U and O must share one shape")
        if self.S.ndim != 2 or (self.S.shape[0] > 0 and self.S.shape[1] != p):
            raise ValueError("S must be |E| x p")
        return self

    @property
    def n_tasks(self) -> int:
        return self.W.shape[0]

    def copy(self) -> "ModelParams":
        return ModelParams(w0=self.w0.copy(), W=self.W.copy(), U=self.U.copy(), O=self.O.copy(), S=self.S.copy())


class RccState(BaseModel):
    """Result of robust regularized clustering of the rows of a data matrix."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    U: FloatArray
    O: FloatArray
    objective_trace: list[float] = Field(default_factory=list)
    sweeps: int = 0
    cluster_labels: IntArray | None = None


class FitResult(BaseModel):
    """
    Converged MTLRRC parameters plus diagnostics.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True)

    params: ModelParams
    hyperparams: HyperParams
    solver: SolverKind
    objective_trace: list[float] = Field(default_factory=list)
    outer_iters: int = 0
    converged: bool = True
    regression_residual: float | None = None
    clustering_residual: float | None = None
    outlier_tasks: tuple[int, ...] = ()
    cluster_labels: IntArray

    @property
    def stationarity_residual(self) -> tuple[float | None, float | None]:
        return self.regression_residual, self.clustering_residual

    @property
    def n_clusters(self) -> int:
        return int(np.unique(self.cluster_labels).size)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1] if self.objective_trace else float("nan")

    def to_json_dict(self) -> dict[str, Any]:
        """Deterministically ordered, JSON-ready representation."""
        hp = self.hyperparams
        return {
            "solver": self.solver.value,
            "hyperparams": {
                "lambda1": hp.lambda1,
                "lambda2": hp.lambda2,
                "lambda3": _finite_or_str(hp.lambda3),
                "penalty": hp.penalty.family.value,
                "gamma": hp.penalty.gamma,
                "nu": hp.nu,
                "k": hp.k,
            },
            "w0": self.params.w0.tolist(),
            "W": self.params.W.tolist(),
            "U": self.params.U.tolist(),
            "O": self.params.O.tolist(),
            "outlier_tasks": list(self.outlier_tasks),
            "cluster_labels": self.cluster_labels.tolist(),
            "objective_trace": list(self.objective_trace),
            "outer_iters": self.outer_iters,
            "converged": self.converged,
            "regression_residual": self.regression_residual,
            "clustering_residual": self.clustering_residual,
        }

    def to_json(self, indent: int | None = 2) -> str:
        return json.dumps(self.to_json_dict(), indent=indent)


def _finite_or_str(value: float) -> float | str:
    return value if math.isfinite(value) else "inf"

"""
Run-level configuration for the CLI.
"""

import math
from pathlib import Path
from typing import Optional

import numpy as np
from pydantic import BaseModel, Field, field_validator, model_validator

from app.core.config import settings
from app.models.enums import GLMFamily, Method, PenaltyFamily, RunMode, SolverKind
from app.models.simulation import SimConfig


def _log_grid(low: float, high: float, num: int) -> list[float]:
    return [float(v) for v in np.logspace(low, high, num)]


class RunConfig(BaseModel):
    """
    Everything a CLI run needs; every output is reproducible from this model.
    """

    mode: RunMode = RunMode.FIT
    data_dir: Optional[Path] = None
    family: Optional[GLMFamily] = None
    sim: SimConfig = Field(default_factory=SimConfig)
    kappas: Optional[list[float]] = Field(default=None, description="Bench outlier probabilities; defaults to sim.kappa")

    penalty: PenaltyFamily = PenaltyFamily.GROUP_SCAD
    gamma: Optional[float] = None
    lambda1_grid: list[float] = Field(default_factory=lambda: _log_grid(-2, 1, 7))
    lambda2_grid: list[float] = Field(default_factory=lambda: _log_grid(-2, 2, 9))
    lambda3_grid: list[float] = Field(default_factory=lambda: _log_grid(-1, 2, 7))
    k: int = Field(default_factory=lambda: settings.DEFAULT_K, ge=1)
    nu: float = Field(default_factory=lambda: settings.DEFAULT_NU, gt=0.0)
    solver: SolverKind = SolverKind.ADMM
    stl_penalty: float = Field(default_factory=lambda: settings.STL_RIDGE_PENALTY, ge=0.0)
    tol: Optional[float] = Field(default=None, gt=0.0)
    max_outer: Optional[int] = Field(default=None, ge=1)

    split: tuple[float, float, float] = (0.6, 0.2, 0.2)
    seed: int = 0
    replicates: int = Field(default=1, ge=1)
    workers: int = Field(default_factory=lambda: settings.WORKERS, ge=0)
    methods: list[Method] = Field(default_factory=lambda: list(Method))
    output_dir: Path = Path("output")

    @field_validator("lambda1_grid", "lambda2_grid")
    @classmethod
    def validate_positive_grid(cls, v):
        if not v:
            raise ValueError("grids must not be empty")
        if any(not (math.isfinite(x) and x > 0) for x in v):
            raise ValueError("lambda1 and lambda2 grids must hold positive finite values")
        return v

    @field_validator("lambda3_grid")
    @classmethod
    def validate_outlier_grid(cls, v):
        if not v:
            raise ValueError("grids must not be empty")
        if any(math.isnan(x) or x <= 0 for x in v):
            raise ValueError("lambda3 grid must hold positive values (inf allowed)")
        return v

    @field_validator("kappas")
    @classmethod
    def validate_kappas(cls, v):
        if v is not None and (not v or any(not 0.0 <= x <= 1.0 for x in v)):
            raise ValueError("kappas must be a non-empty list of probabilities")
        return v

    @model_validator(mode="after")
    def validate_mode(self):
        if self.mode == RunMode.FIT and self.data_dir is None:
            raise ValueError("fit mode needs data_dir")
        if not self.methods:
            raise ValueError("methods must not be empty")
        return self

    @property
    def bench_kappas(self) -> list[float]:
        return list(self.kappas) if self.kappas is not None else [self.sim.kappa]

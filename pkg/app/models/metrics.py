"""
Evaluation report model.
"""

from typing import Any, Optional

from pydantic import BaseModel, Field, field_validator


class MetricReport(BaseModel):
    """
    Prediction, recovery and outlier-detection metrics of one fitted model.

    ``tpr`` is None when there are no true outlier tasks.
    """

    nmse: Optional[float] = None
    rmse: Optional[float] = None
    tpr: Optional[float] = None
    fpr: Optional[float] = None
    auc: Optional[float] = None
    per_task_nmse: list[float] = Field(default_factory=list)
    detected: list[int] = Field(default_factory=list)

    @field_validator("tpr", "fpr", "auc")
    @classmethod
    def validate_unit_interval(cls, v):
        if v is not None and not 0.0 <= v <= 1.0:
            raise ValueError("rates must lie in [0, 1]")
        return v

    def to_row(self, **keys: Any) -> dict[str, Any]:
        """Flat row for the replicate table, identifying columns first."""
        return {**keys, "nmse": self.nmse, "rmse": self.rmse, "tpr": self.tpr, "fpr": self.fpr}

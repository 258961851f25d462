"""
Penalty specification for the outlier block.
"""

import logging
import math

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.config import settings
from app.models.enums import PenaltyFamily

logger = logging.getLogger(__name__)


class PenaltySpec(BaseModel):
    """
    A group penalty family with threshold scale ``lam`` and shape ``gamma``.

    ``lam`` may be ``inf``: every thresholding function then returns zero, which pins
    the outlier block at zero.
    """

    model_config = ConfigDict(frozen=True)

    family: PenaltyFamily
    lam: float = Field(ge=0.0, description="Threshold scale lambda")
    gamma: float | None = Field(default=None, description="Shape gamma (SCAD/MCP only)")

    @model_validator(mode="after")
    def validate_gamma(self):
        if math.isnan(self.lam):
            raise ValueError("lambda must not be NaN")
        if self.family == PenaltyFamily.GROUP_SCAD:
            if self.gamma is None or not self.gamma > 2:
                raise ValueError("group SCAD requires gamma > 2")
        elif self.family == PenaltyFamily.GROUP_MCP:
            if self.gamma is None or not self.gamma > 1:
                raise ValueError("group MCP requires gamma > 1")
        elif self.family == PenaltyFamily.MULTI_TUKEY and self.gamma is not None:
            logger.warning("gamma is ignored by the multivariate Tukey penalty")
        return self

    @classmethod
    def default(cls, family: PenaltyFamily, lam: float, gamma: float | None = None) -> "PenaltySpec":
        """Build a spec, filling gamma from settings for SCAD/MCP when not given."""
        if gamma is None:
            if family == PenaltyFamily.GROUP_SCAD:
                gamma = settings.SCAD_GAMMA
            elif family == PenaltyFamily.GROUP_MCP:
                gamma = settings.MCP_GAMMA
        if family in (PenaltyFamily.GROUP_LASSO, PenaltyFamily.MULTI_TUKEY):
            gamma = None
        return cls(family=family, lam=lam, gamma=gamma)

    def with_lambda(self, lam: float) -> "PenaltySpec":
        return self.model_copy(update={"lam": lam})

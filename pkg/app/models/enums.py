from enum import Enum


class PenaltyFamily(str, Enum):
    """Group penalties for the outlier block."""

    GROUP_LASSO = "group_lasso"
    GROUP_SCAD = "group_scad"
    GROUP_MCP = "group_mcp"
    MULTI_TUKEY = "multi_tukey"

    @property
    def code(self) -> str:
        """Short CLI code."""
        return _PENALTY_CODES[self]

    @property
    def label(self) -> str:
        """Short label used in method names, e.g. ``GS``."""
        return _PENALTY_LABELS[self]

    @classmethod
    def from_code(cls, code: str) -> "PenaltyFamily":
        for family, family_code in _PENALTY_CODES.items():
            if code in (family_code, family.value):
                return family
        raise ValueError(f"Unknown penalty '{code}'")


_PENALTY_CODES = {
    PenaltyFamily.GROUP_LASSO: "gl",
    PenaltyFamily.GROUP_SCAD: "gs",
    PenaltyFamily.GROUP_MCP: "gm",
    PenaltyFamily.MULTI_TUKEY: "tukey",
}

_PENALTY_LABELS = {
    PenaltyFamily.GROUP_LASSO: "GL",
    PenaltyFamily.GROUP_SCAD: "GS",
    PenaltyFamily.GROUP_MCP: "GM",
    PenaltyFamily.MULTI_TUKEY: "MT",
}


class GLMFamily(str, Enum):
    """Response distributions supported by the per-task GLMs."""

    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"


class OutlierCase(str, Enum):
    """Outlier regimes of the synthetic generator."""

    CASE1 = "case1"
    CASE2 = "case2"


class SolverKind(str, Enum):
    """Estimation algorithms for MTLRRC."""

    ADMM = "admm"
    BCD = "bcd"


class RunMode(str, Enum):
    """CLI modes."""

    FIT = "fit"
    SIMULATE = "simulate"
    BENCH = "bench"


class Method(str, Enum):
    """Methods compared by the benchmark harness."""

    MTLRRC_GL = "MTLRRC-GL"
    MTLRRC_GS = "MTLRRC-GS"
    MTLRRC_GM = "MTLRRC-GM"
    MTLCVX = "MTLCVX"
    HMTLK = "HMTLK"

    @property
    def penalty(self) -> PenaltyFamily | None:
        return {
            Method.MTLRRC_GL: PenaltyFamily.GROUP_LASSO,
            Method.MTLRRC_GS: PenaltyFamily.GROUP_SCAD,
            Method.MTLRRC_GM: PenaltyFamily.GROUP_MCP,
        }.get(self)

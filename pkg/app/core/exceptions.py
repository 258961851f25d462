"""
Exception hierarchy for MTLRRC.
"""

from typing import Any, Optional


class MTLRRCError(Exception):
    """Base class for all errors raised by the package."""

    def to_dict(self) -> dict[str, Any]:
        """Machine-readable form used by the CLI on stderr."""
        return {"error": type(self).__name__, "message": str(self)}


class InvalidArgumentError(MTLRRCError, ValueError):
    """Bad shapes, non-finite values or parameters outside their domain."""


class SingularSystemError(MTLRRCError):
    """A Newton system could not be solved."""

    def __init__(self, message: str, iteration: int, task: Optional[int] = None):
        self.iteration = iteration
        self.task = task
        where = f" (task {task})" if task is not None else ""
        super().__init__(f"{message} at iteration {iteration}{where}")

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update({"iteration": self.iteration, "task": self.task})
        return data


class ConvergenceError(MTLRRCError):
    """An iteration cap was reached where convergence is required."""

    def __init__(self, message: str, iterations: int, last_iterate: Any = None, trace: Optional[list] = None):
        self.iterations = iterations
        self.last_iterate = last_iterate
        self.trace = list(trace) if trace is not None else []
        super().__init__(f"{message} after {iterations} iterations")

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update({"iterations": self.iterations, "trace_tail": [float(v) for v in self.trace[-5:]]})
        return data


class DataValidationError(MTLRRCError):
    """Problems with ingested task files."""

    def __init__(self, source: str, message: str):
        self.source = source
        self.message = message
        super().__init__(f"{source}: {message}")

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update({"source": self.source})
        return data


class GridSearchError(MTLRRCError):
    """Every grid point of a search failed."""

    def __init__(self, message: str, diagnostics: list[dict[str, Any]]):
        self.diagnostics = diagnostics
        super().__init__(message)

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update({"diagnostics": self.diagnostics})
        return data


class ReplicateError(MTLRRCError):
    """A benchmark replicate failed."""

    def __init__(self, message: str, replicate: int, kappa: float):
        self.replicate = replicate
        self.kappa = kappa
        super().__init__(f"replicate {replicate} (kappa={kappa}): {message}")

    def to_dict(self) -> dict[str, Any]:
        data = super().to_dict()
        data.update({"replicate": self.replicate, "kappa": self.kappa})
        return data

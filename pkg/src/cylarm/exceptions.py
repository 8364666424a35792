"""Exceptions for cylarm."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from cylarm.sim import SimTrace


class WorkbenchError(Exception):
    """Base class for workbench errors."""


class SingularInertia(WorkbenchError):
    """Raised when the inertia matrix cannot be inverted reliably."""


class NonFinite(WorkbenchError):
    """Raised when a state component is not finite or leaves its bound."""


class EmptyTrace(WorkbenchError):
    """Raised when metrics are requested for a trace without records."""


class OutputError(WorkbenchError):
    """Raised when an output file cannot be written or read."""


class InvalidConfig(WorkbenchError):
    """Raised when a configuration value is rejected."""

    def __init__(self, key_path: str, reason: str) -> None:
        """Initialize with the dotted path of the offending key."""

        super().__init__(f"{key_path}: {reason}")
        self.key_path = key_path
        self.reason = reason


class SimulationAborted(WorkbenchError):
    """Raised when the closed loop stops before the horizon."""

    def __init__(self, trace: SimTrace, cause: WorkbenchError) -> None:
        """Keep the partial trace and the error that stopped it."""

        last = float(trace.t[-1]) if len(trace) else 0.0
        super().__init__(f"aborted at t={last:g}: {cause}")
        self.trace = trace
        self.cause = cause

"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: input/usage problems exit 1, numerical
failures exit 2, validation-suite failures exit 3.
"""

from __future__ import annotations


class ThreatPropagationError(Exception):
    """Base class for all toolkit errors."""


class GraphError(ThreatPropagationError):
    """Invalid graph construction or graph-shaped input."""


class DisconnectedGraphError(GraphError):
    """An operation that requires a connected graph got a disconnected one."""


class ObservationError(ThreatPropagationError):
    """Invalid observation set (empty, out-of-range probability, bad time)."""


class ConvergenceError(ThreatPropagationError):
    """Iterative solver failed to reach the requested tolerance."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class EigenSolverError(ThreatPropagationError):
    """Eigenvector computation failed or did not meet its residual bound."""


class ExperimentError(ThreatPropagationError):
    """Monte-Carlo experiment could not produce a trustworthy result."""


class ValidationFailure(ThreatPropagationError):
    """One or more checks of the self-validation suite failed."""

"""
Exception types raised by the laboratory.

Argument-domain problems inside numerical routines raise plain
ValueError; the classes here mark failures the CLI maps to exit codes.
"""
from typing import Any, Dict, List, Optional


class WhitLabError(Exception):
    """Base class for laboratory errors."""


class ConfigurationError(WhitLabError, ValueError):
    """Invalid configuration or violated command precondition."""


class QuadratureError(WhitLabError, RuntimeError):
    """
    Integration did not reach the requested tolerance.

    Attributes:
        label: Name of the integral that failed
        achieved_error: Error estimate reported by the integrator
        tolerance: Tolerance that was requested
    """

    def __init__(self, label: str, achieved_error: float, tolerance: float) -> None:
        super().__init__(
            f"Quadrature '{label}' did not converge: "
            f"achieved error {achieved_error:.3e} > tolerance {tolerance:.3e}"
        )
        self.label = label
        self.achieved_error = achieved_error
        self.tolerance = tolerance


class FactorizationError(WhitLabError, RuntimeError):
    """Covariance matrix is too far from positive semidefinite."""

    def __init__(self, min_eigenvalue: float, threshold: float) -> None:
        super().__init__(
            f"Covariance matrix not PSD: min eigenvalue {min_eigenvalue:.3e} "
            f"below clipping threshold {threshold:.3e}"
        )
        self.min_eigenvalue = min_eigenvalue
        self.threshold = threshold


class InterlacingError(WhitLabError, RuntimeError):
    """
    q-Whittaker configuration left the interlacing cone.

    Attributes:
        events: Event log up to and including the offending jump
        violation: Description of the violated inequality
    """

    def __init__(self, violation: str, events: Optional[List[Dict[str, Any]]] = None) -> None:
        super().__init__(f"Interlacing violated: {violation}")
        self.violation = violation
        self.events = events or []

"""
Collected outcomes of numerical checks.

Failed checks are recorded, not raised; the CLI turns an invalid result
into exit code 1.
"""
from typing import Any, Dict, List

from whitlab.core.elements import IdentityCheck


class CheckResult:
    """Result of a batch of checks."""

    def __init__(self) -> None:
        self.valid: bool = True
        self.errors: List[str] = []
        self.warnings: List[str] = []
        self.info: Dict[str, Any] = {}

    def add_error(self, message: str) -> None:
        """Add a failed check."""
        self.errors.append(message)
        self.valid = False

    def add_warning(self, message: str) -> None:
        self.warnings.append(message)

    def record(self, check: IdentityCheck, context: str = "") -> bool:
        """Fail the result if an identity check missed its tolerance."""
        if not check.passed:
            where = f"{context}/" if context else ""
            self.add_error(
                f"{where}{check.name}: |{check.lhs!r} - {check.rhs!r}| = {check.residual:.3e}"
                f" exceeds {check.tolerance:.3e}"
            )
        return check.passed

    def to_dict(self) -> dict:
        """Convert to dictionary."""
        return {
            'valid': self.valid,
            'errors': self.errors,
            'warnings': self.warnings,
            'info': self.info,
        }

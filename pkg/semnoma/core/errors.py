"""
Exception hierarchy shared by the rate models and the solvers.
"""

import json
import logging
from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class SemNomaError(Exception):
    """Base exception for model and solver errors."""

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        self.message = message
        self.details = details or {}

        logger.debug(f"{type(self).__name__}: {message}")
        if self.details:
            logger.debug(f"Details: {json.dumps(self.details, indent=2, default=str)}")

        super().__init__(self.message)

    def __str__(self) -> str:
        """Format error message with relevant context."""
        parts = [self.message]
        if self.details:
            parts.append(f"Details: {self.details}")
        return " | ".join(parts)


class ParameterError(SemNomaError, ValueError):
    """Raised when model parameters violate their invariants."""
    pass


class CalibrationError(ParameterError):
    """Raised when a logistic curve cannot be fitted to the requested anchor."""
    pass


class ArgumentError(SemNomaError, ValueError):
    """Raised for invalid call arguments (empty inputs, zero noise, size limits)."""
    pass


class InfeasibleError(SemNomaError):
    """Raised when the N-user rate target cannot be met by any policy."""
    pass

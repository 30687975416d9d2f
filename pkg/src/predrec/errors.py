"""
Exception hierarchy for predrec.

Every error derives from ValueError so command-line tools can catch ValueError
as "invalid input".
"""

from typing import Optional


class PredrecError(ValueError):
    """Base class for all predrec errors."""


class DomainError(PredrecError):
    """A value lies outside the domain an operation is defined on."""


class DegenerateObservationError(PredrecError):
    """The marginal density of an observation vanished under the working measure."""

    def __init__(self, message: str, index: Optional[int] = None,
                 permutation: Optional[int] = None) -> None:
        self.index = index
        self.permutation = permutation
        location = []
        if permutation is not None:
            location.append(f"permutation {permutation}")
        if index is not None:
            location.append(f"step {index}")
        if location:
            message = f"{message} ({', '.join(location)})"
        super().__init__(message)


class ConfigError(PredrecError):
    """Invalid configuration value."""

    def __init__(self, message: str, field: Optional[str] = None) -> None:
        self.field = field
        super().__init__(message)


class FormatError(PredrecError):
    """An input file does not follow the expected schema."""


class IllPosedTestError(PredrecError):
    """A test problem whose null set carries no prior mass."""

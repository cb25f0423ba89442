"""Exception types shared across the package."""


class CubenetError(Exception):
    """Base class for all cubenet errors."""


class SpecError(CubenetError):
    """Invalid or unsupported construction/analysis specification."""


class ConstructionError(CubenetError):
    """A builder could not produce a valid (connected, well-formed) topology."""


class ResourceLimitError(CubenetError):
    """Requested object exceeds the configured size guards."""


class NumericError(CubenetError):
    """A numeric solve failed; carries the residual when available."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual

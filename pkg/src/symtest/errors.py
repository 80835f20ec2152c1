"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class MemoryGuardError(ValidationError):
    """Raised when a dense operator would exceed the supported size."""


class UnsupportedError(ValidationError):
    """Raised for parameter combinations outside the supported range."""


class InconsistencyError(RuntimeError):
    """Raised when two computed quantities contradict a proven ordering."""

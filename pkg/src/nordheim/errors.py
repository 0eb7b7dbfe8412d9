"""Exception types shared across the package."""


class NordheimError(Exception):
    """Base class for all package errors."""


class DomainError(NordheimError, ValueError):
    """An argument lies outside an operation's mathematical domain."""


class GridMismatchError(DomainError):
    """Two objects that must share a grid (or tensor) do not."""


class ModelError(NordheimError, ValueError):
    """A potential model is malformed or produced non-finite values."""


class SizingError(NordheimError, MemoryError):
    """A requested allocation exceeds the configured size budget."""

    def __init__(self, message: str, required_bytes: int):
        super().__init__(message)
        self.required_bytes = required_bytes


class FormatError(NordheimError, ValueError):
    """A binary cache file is corrupt or truncated."""


class CacheMissError(NordheimError):
    """A cache file is valid but does not match the requested configuration."""


class NumericsError(NordheimError, ArithmeticError):
    """A numerical procedure failed (non-finite values, no convergence)."""


class ConfigError(NordheimError, ValueError):
    """Configuration text failed validation; carries the full error list."""

    def __init__(self, errors: list[str]):
        super().__init__("; ".join(errors))
        self.errors = list(errors)

"""Exception types shared across the toolkit."""


class HolonomyError(Exception):
    """Base class for all toolkit errors."""


class PreconditionError(HolonomyError, ValueError):
    """An operation was called with input violating its contract."""


class DegeneracyError(HolonomyError, ValueError):
    """A parameter point (or loop) touches a spectral degeneracy set."""


class ContinuationError(HolonomyError, RuntimeError):
    """Frame continuation failed; carries the offending step index."""

    def __init__(self, message: str, step: int | None = None):
        super().__init__(message)
        self.step = step


class UnsupportedError(HolonomyError, ValueError):
    """Requested model/direction/loop combination is not provided."""


class ConfigError(HolonomyError, ValueError):
    """Invalid experiment configuration."""

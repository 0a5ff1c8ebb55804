"""Exception types shared across the library and mapped to CLI exit codes."""
from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the physical or geometric domain of an operation."""

    def __init__(self, message: str, module: str = "capa"):
        super().__init__(message)
        self.module = module


class ConfigError(DomainError):
    """A configuration key is unknown, malformed, or violates a constraint."""


class NumericError(RuntimeError):
    """A numerical procedure failed (conditioning, positivity, convergence)."""

    def __init__(self, message: str, module: str = "capa"):
        super().__init__(message)
        self.module = module


class ConvergenceError(NumericError):
    """An iterative solver hit its iteration budget; carries the solver state."""

    def __init__(self, message: str, module: str = "capa", state=None):
        super().__init__(message, module=module)
        self.state = state

"""Exception types shared across the package."""
import numpy as np


class InvalidArgumentError(ValueError):
    """An argument violates an operation's precondition."""


class UnsupportedError(NotImplementedError):
    """The input is valid in general but not handled by this operation."""


class AssemblyError(RuntimeError):
    """Element assembly failed; ``element`` holds the offending index."""

    def __init__(self, message, element=None):
        super().__init__(message)
        self.element = element


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization met a non-positive pivot at ``pivot``."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot


class ConfigError(ValueError):
    """Malformed or unknown configuration entry."""

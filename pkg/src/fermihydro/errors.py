"""Exception types shared across the package."""


class FermihydroError(Exception):
    """Base class for all package errors."""


class ResourceLimitError(FermihydroError):
    """Requested object exceeds the configured memory/size guard."""


class ConfigurationError(FermihydroError):
    """Inconsistent model definition (lattice, potential, config file)."""


class DomainError(FermihydroError):
    """Input outside the admissible region of a map (state, EOS, solver)."""


class ConvergenceError(FermihydroError):
    """Iterative solver failed to reach its tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ToleranceError(FermihydroError):
    """A numerical result could not be certified to the requested tolerance."""


class ContractViolationError(FermihydroError):
    """An object violated a declared invariant (hermiticity, trace, ...)."""

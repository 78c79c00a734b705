"""Exception hierarchy shared across the library."""


class ConvexRiskError(Exception):
    """Base class for all library errors."""


class ValidationError(ConvexRiskError):
    """Malformed input data (schemas, probability vectors, grids)."""


class DomainError(ConvexRiskError):
    """Evaluation requested outside the effective domain of a function."""


class NormalizationError(ConvexRiskError):
    """An operation required a centered functional (value 0 at 0)."""


class FeasibilityError(ConvexRiskError):
    """An inf-convolution or transfer problem is degenerate (value -inf)."""

    def __init__(self, msg, direction=None, witness=None):
        super().__init__(msg)
        self.direction = direction
        self.witness = witness


class ArbitrageError(ConvexRiskError):
    """The instrument set admits an arbitrage; carries a separating strategy."""

    def __init__(self, msg, strategy=None):
        super().__init__(msg)
        self.strategy = strategy


class SolverError(ConvexRiskError):
    """A numerical solve failed to converge or hit an internal inconsistency."""


class CapabilityError(ConvexRiskError):
    """The requested combination of inputs is outside what the library supports."""

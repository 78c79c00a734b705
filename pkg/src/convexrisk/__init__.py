"""Static and dynamic convex risk measures on finite scenario spaces.

Submodules:
  gridfn    -- grid-based 1-D convex analysis (conjugates, convolutions)
  simplexlp -- dense two-phase simplex with certificates
  market    -- probability spaces, instruments, superhedging prices
  measures  -- the static risk-measure catalog
  transfer  -- inf-convolution and optimal risk transfer
  lattice   -- binomial-lattice BSDE dynamics
  scenario  -- JSON scenario ingestion
  cli       -- command-line entry point
"""

__version__ = "0.1.0"

from .errors import (
    ArbitrageError,
    CapabilityError,
    ConvexRiskError,
    DomainError,
    FeasibilityError,
    NormalizationError,
    SolverError,
    ValidationError,
)
from .market import InstrumentSet, Measure, Position, ProbSpace

__all__ = [
    "ArbitrageError",
    "CapabilityError",
    "ConvexRiskError",
    "DomainError",
    "FeasibilityError",
    "InstrumentSet",
    "Measure",
    "NormalizationError",
    "Position",
    "ProbSpace",
    "SolverError",
    "ValidationError",
    "__version__",
]

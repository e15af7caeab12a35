"""Exception hierarchy shared across the package."""


class ChainboundError(Exception):
    """Base class for all package-specific errors."""


class DivisionByZeroInterval(ChainboundError):
    """Division by an interval that contains zero."""


class InfeasibleEnclosure(ChainboundError):
    """Gauss-Seidel intersection became empty: the starting box was not a
    valid enclosure of the solution set."""


class NonConvergence(ChainboundError):
    """Iterative method hit its iteration cap before reaching tolerance."""

    def __init__(self, message, estimate=None, residual=None):
        super().__init__(message)
        self.estimate = estimate
        self.residual = residual


class InvalidParameter(ChainboundError):
    """A scalar parameter (discount factor, tolerance, ...) is out of range."""


class InvalidQuery(ChainboundError):
    """Property query malformed or incompatible with the requested operation."""


class InvalidInput(ChainboundError):
    """Model input has the wrong arity or type."""


class UnboundedInput(ChainboundError):
    """A model input variable lacks the finite bounds the encoder requires."""


class InfeasibleFeatureSet(ChainboundError):
    """The feature set admits no points."""


class UnboundedBilinearVariable(ChainboundError):
    """A bilinear factor variable lacks the finite bounds McCormick requires."""


class NumericalFailure(ChainboundError):
    """The LP backend reported a numerical breakdown."""


class InternalConsistencyError(ChainboundError):
    """Re-verification of a solver witness failed; indicates a bug."""

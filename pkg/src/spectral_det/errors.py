"""Exception types raised across the package."""


class SpectralDetError(Exception):
    """Base class for all package errors."""


class DomainError(SpectralDetError, ValueError):
    """An argument lies outside the domain of the operation."""


class StabilityError(SpectralDetError, ValueError):
    """A state matrix or pole violates the decay requirement."""


class PoleError(SpectralDetError, ValueError):
    """A resolvent-type factor is singular at the requested point."""


class AccuracyError(SpectralDetError, ArithmeticError):
    """Successive refinements disagree above the requested tolerance."""


class KernelEvaluationError(SpectralDetError, ValueError):
    """A kernel returned a non-finite value at some node pair."""


class ConsistencyError(SpectralDetError, ArithmeticError):
    """Two routes to the same quantity disagree, or an identity fails."""


class SingularTauError(SpectralDetError, ArithmeticError):
    """I + R_x is numerically singular."""


class DivergenceError(SpectralDetError, ArithmeticError):
    """A series or integral fails to converge."""


class StiffnessError(SpectralDetError, ArithmeticError):
    """The ODE integrator could not make progress."""


class GridError(SpectralDetError, ValueError):
    """A sampling grid is too coarse or otherwise malformed."""


class NotFiniteGapError(SpectralDetError, ArithmeticError):
    """Curve coefficients drift with the evaluation point."""


class UnsupportedError(SpectralDetError, ValueError):
    """The input lacks a property the operation relies on."""


class NodeError(SpectralDetError, ArithmeticError):
    """A function that must stay nonzero vanishes on the grid."""

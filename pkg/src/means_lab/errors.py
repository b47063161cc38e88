"""Exception hierarchy."""


class MeansLabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(MeansLabError, ValueError):
    """Input outside the domain of a mean or function (empty, non-finite, out of interval)."""


class InversionError(MeansLabError, ArithmeticError):
    """A generator could not be inverted on the bracket implied by the inputs."""


class AxiomViolation(MeansLabError, ArithmeticError):
    """A quasideviation failed an axiom while solving its mean equation."""


class ConvergenceError(MeansLabError, ArithmeticError):
    """An iterative solver hit its iteration cap."""


class NotNormalizableError(MeansLabError, ValueError):
    """The diagonal second partial is not strictly negative."""


class NonDifferentiableError(MeansLabError, ArithmeticError):
    """A difference-quotient sequence diverged."""


class ConvexityPreconditionError(MeansLabError, ValueError):
    """A necessary condition for convexity fails (e.g. non-positive one-sided derivative).

    Deciders treat this as a refutation rather than a crash.
    """

    def __init__(self, message, at=None):
        super().__init__(message)
        self.at = at


class EvaluationError(MeansLabError, RuntimeError):
    """A user-supplied evaluator raised or returned non-finite values."""

    def __init__(self, message, offending_input=None):
        super().__init__(message)
        self.offending_input = offending_input

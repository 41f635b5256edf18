"""Exception types shared across the package."""


class NomalinkError(Exception):
    """Base class for all package-specific errors."""


class DomainError(NomalinkError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DegenerateBeamformingError(NomalinkError):
    """V^H R_t V is singular, so the zero-forcing statistic is undefined."""


class EigenvalueDegeneracyError(NomalinkError):
    """Receive-eigenvalue degeneracy beyond what perturbation can resolve."""


class SeriesCancellationError(NomalinkError):
    """The determinant series lost convergence; carries the partial sum."""

    def __init__(self, message, partial_sum=None):
        super().__init__(message)
        self.partial_sum = partial_sum


class InfeasibleDefaultError(NomalinkError):
    """The epsilon-recursion produced a nonpositive power coefficient."""


class NoRootError(NomalinkError):
    """Bracket expansion failed to straddle a root of the rate equation."""


class EstimationError(NomalinkError):
    """A Monte Carlo estimate could not be formed (e.g. all trials discarded)."""


class ScenarioError(NomalinkError, ValueError):
    """A scenario file failed to parse or violated a type invariant."""

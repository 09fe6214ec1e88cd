"""Exception and warning types shared across the package."""


class PoroflowError(Exception):
    """Base class for all errors raised by poroflow."""


class DomainError(PoroflowError, ValueError):
    """Argument outside the domain where a branch or phase exists."""


class ConvergenceError(PoroflowError):
    """An iterative method failed to converge.

    ``best`` holds the best iterate found (if any) and ``t`` the simulation
    time at which the failure happened (transient runs only).
    """

    def __init__(self, message, best=None, residual_norm=None, t=None):
        super().__init__(message)
        self.best = best
        self.residual_norm = residual_norm
        self.t = t


class SingularMatrixError(PoroflowError):
    """Banded factorisation met a pivot below the relative tolerance."""


class StepSizeError(ConvergenceError):
    """Adaptive time step fell below the configured minimum."""


class ConfigError(PoroflowError, ValueError):
    """Inconsistent boundary/regime data handed to an assembly routine."""


class FeatureError(PoroflowError, ValueError):
    """A profile does not carry the feature being extracted."""


class ParseError(PoroflowError, ValueError):
    """Configuration file could not be parsed."""


class ValidationError(PoroflowError, ValueError):
    """Configuration parsed but violates one or more invariants.

    ``problems`` lists every violated invariant as a human-readable string.
    """

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class BifurcationWarning(UserWarning):
    """Degenerate gradient coefficients (k1*k3 - k2**2 == 0)."""

"""Exception and warning types shared across the package."""


class PmalaError(Exception):
    """Base class for all errors raised by this package."""


class NotPositiveDefinite(PmalaError):
    """A Cholesky pivot was non-positive: the matrix is not a valid metric."""


class NotSymmetric(PmalaError):
    pass


class DimensionMismatch(PmalaError, ValueError):
    pass


class NonFiniteDensity(PmalaError):
    """A log-density evaluation needed by a finite-difference stencil was not finite."""


class NonFiniteTrajectory(PmalaError):
    """The ODE solution blew up for the requested parameters."""


class MissingMetric(PmalaError):
    """A position-dependent family was requested from a model without a metric."""


class InvalidRun(PmalaError):
    """Too many ensemble paths went non-finite for the run to be trusted."""


class InsufficientSamples(PmalaError):
    pass


class ConstantSeries(PmalaError):
    pass


class EmptyInput(PmalaError, ValueError):
    pass


class BadConfig(PmalaError):
    pass


class MissingDataset(PmalaError):
    pass


class BudgetExhausted(UserWarning):
    """Step-size tuning ended with an acceptance rate outside the requested band."""

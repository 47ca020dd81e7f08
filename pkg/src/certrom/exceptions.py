"""Exception hierarchy.

Every error carries a short machine-readable ``category`` string which the
command-line interface reports on failure.
"""


class CertromError(Exception):
    """Base class for all errors raised by certrom."""

    category = "error"


class DomainError(CertromError, ValueError):
    """Input outside the domain of an operation (shape, sign, symmetry...)."""

    category = "domain"


class RankDeficient(CertromError, ValueError):
    """A least-squares or basis problem does not have full numerical rank.

    Attributes
    ----------
    rank : int
        Numerical rank that was detected.
    expected : int
        Rank the operation required.
    """

    category = "rank_deficient"

    def __init__(self, message, rank=None, expected=None):
        super().__init__(message)
        self.rank = rank
        self.expected = expected


class InsufficientData(CertromError, ValueError):
    """Fewer data rows than unknowns."""

    category = "insufficient_data"


class ConvergenceError(CertromError, RuntimeError):
    """An iterative method hit its iteration cap.

    The last iterate is available as ``last_iterate`` and the last estimate
    as ``estimate``.
    """

    category = "convergence"

    def __init__(self, message, last_iterate=None, estimate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.estimate = estimate


class FactorizationError(CertromError, ArithmeticError):
    """A matrix that must be factorized is singular."""

    category = "factorization"


class ModelMismatch(CertromError, ValueError):
    """Data are inconsistent with a linear time-invariant model."""

    category = "model_mismatch"


class ModelMismatchWarning(UserWarning):
    """Least-squares fit left a residual too large for exact LTI data."""


class ConfigError(CertromError, ValueError):
    category = "config"


class StaleArtifacts(CertromError, RuntimeError):
    """Offline artifacts were produced from a different configuration."""

    category = "stale_artifacts"


class NotFittedError(CertromError, AttributeError):
    category = "not_fitted"

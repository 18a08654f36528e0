"""Exception types shared across the package."""


class ClamrError(Exception):
    """Base class for package-specific errors."""


class DomainError(ClamrError, ValueError):
    """A numeric argument lies outside its allowed domain."""


class NonFiniteError(DomainError):
    """An interval endpoint or observed value is NaN or infinite."""


class EmptyRegionError(DomainError):
    """An interval is degenerate: lower >= upper."""


class OverlapError(DomainError):
    """Regions overlap in a spec that requires disjoint intervals."""


class ConfigError(ClamrError, ValueError):
    """Sampler configuration is inconsistent with itself or the data."""


class LengthMismatch(ClamrError, ValueError):
    """Two partitions of supposedly the same items differ in length."""


class EmptyDraws(ClamrError, ValueError):
    """An operation needs at least one retained draw."""


class InsufficientDraws(ClamrError, ValueError):
    """An operation needs more retained draws than were supplied."""


class DimensionMismatch(ClamrError, ValueError):
    """Posterior draws and a reference partition disagree on the number of rows."""


class CandidateSpaceTooLarge(ClamrError, ValueError):
    """Exhaustive partition search was requested past the enumeration guard."""


class MissingDataError(ClamrError, ValueError):
    """A method that requires complete data was given missing entries."""


class ConvergenceError(ClamrError, RuntimeError):
    """An iterative calibration failed to bracket or reach its target."""


class NumericalUnderflow(ClamrError, ArithmeticError):
    """A probability normalization underflowed to zero.

    The shipped kernels normalize in log space (log-sum-exp), so they do not
    raise this; it is part of the public error surface for completeness.
    """


class LineageError(ClamrError, ValueError):
    """Pipeline artifacts passed to one stage were produced by different runs."""

"""Exception types shared across the package."""


class RepdimError(Exception):
    """Base class for all package errors."""


class DomainError(RepdimError):
    """Point or parameter outside the admissible domain."""


class ConvergenceError(RepdimError):
    """An iterative geometric computation failed to stabilize."""


class GeometryError(RepdimError):
    """Inconsistent domain pair (e.g. inclusion is not a contraction)."""


class RootError(RepdimError):
    """Preimage computation hit a critical value."""


class EmptyPreimage(RepdimError):
    """Every candidate preimage was filtered out; domains are misconfigured."""


class NumericError(RepdimError):
    """Nonfinite intermediate value or violated numeric invariant."""


class ContractionError(RepdimError):
    """Fitted contraction rate is not below one."""


class NoSignChange(RepdimError):
    """Pressure does not change sign over the requested range."""


class DegenerateBound(RepdimError):
    """A denominator in the a-priori dimension bounds is not positive."""


class ScaleError(RepdimError):
    """Clustering scale below cloud resolution."""


class ResolutionError(RepdimError):
    """Point cloud too coarse for the requested box radii."""


class ValidationError(RepdimError):
    """A sampled map violates the admissibility conditions."""


class ConfigError(RepdimError):
    """Malformed or inconsistent run configuration."""

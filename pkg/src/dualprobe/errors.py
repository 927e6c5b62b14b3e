"""Exception types shared across the package."""


class DualProbeError(Exception):
    """Base class for numerical failures (CLI exit status 1)."""


class ConfigError(ValueError):
    """Invalid experiment configuration or layout (CLI exit status 2)."""


class LayoutError(ConfigError):
    pass


class InterpolationDomainError(ValueError):
    pass


class GridResolutionError(ConfigError):
    pass


class SolverError(DualProbeError):
    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class TruncationError(DualProbeError):
    pass


class NearSingularSystemError(DualProbeError):
    pass


class DegenerateBackscatterError(DualProbeError):
    pass


class AmbiguousAlignmentError(DualProbeError):
    pass


class IllConditionedProbeError(DualProbeError):
    pass


class FitDomainError(ValueError):
    pass


class NearSingularityWarning(UserWarning):
    """Green function evaluated closer to its source than the configured floor."""

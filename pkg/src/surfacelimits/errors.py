"""Exception types raised by the library."""


class SurfaceLimitsError(Exception):
    """Base class for all library errors."""


class DegenerateScene(SurfaceLimitsError):
    """Two sources coincide, so the PSF overlap matrix is singular."""


class IllConditioned(SurfaceLimitsError):
    """A matrix that must be inverted exceeds the condition-number limit."""


class SingularInformation(SurfaceLimitsError):
    """A Fisher information matrix cannot be inverted."""


class DimensionMismatch(SurfaceLimitsError, ValueError):
    pass


class QuadratureFailure(SurfaceLimitsError):
    """Adaptive quadrature could not meet its tolerance."""


class ConfigError(SurfaceLimitsError, ValueError):
    pass

"""Exception types shared across the package."""


class GeometryError(ValueError):
    """Out-of-domain argument or degenerate spherical configuration."""


class ConfigurationError(ValueError):
    """A parameter combination the pipeline cannot run with."""


class RoutingError(RuntimeError):
    """Route construction failed; carries the offending cell when known."""

    def __init__(self, message, cell=None):
        super().__init__(message)
        self.cell = cell


class SaturationError(RuntimeError):
    """A verification step required a saturated-traffic run and did not get one."""

"""Exception hierarchy shared by the library and the command line."""


class WatermarkError(Exception):
    """Base class for library errors."""


class DomainError(WatermarkError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class CapExceeded(WatermarkError, ValueError):
    """An exact enumeration was requested beyond its configured size cap."""


class InfeasibleError(WatermarkError, ValueError):
    """No candidate satisfies the distortion constraint."""

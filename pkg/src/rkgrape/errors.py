"""Exception types shared across the package."""


class RkGrapeError(Exception):
    """Base class for all package-specific errors."""


class GridMismatchError(RkGrapeError):
    """Pixel and subpixel grids are incommensurate."""


class IntegrationError(RkGrapeError):
    """A subpixel integration exhausted its step budget."""

    def __init__(self, message, subpixel=None):
        super().__init__(message)
        self.subpixel = subpixel


class DivergenceError(RkGrapeError):
    """The integrated state became non-finite."""

    def __init__(self, message, subpixel=None):
        super().__init__(message)
        self.subpixel = subpixel


class CalibrationError(RkGrapeError):
    """One-photon power calibration failed; carries the scan trace."""

    def __init__(self, message, scan=None):
        super().__init__(message)
        self.scan = scan or []


class DimensionTooSmallError(RkGrapeError):
    """Truncation-leak diagnostic exceeded its threshold."""


class ConfigError(RkGrapeError):
    """A run configuration is missing keys or holds invalid values."""

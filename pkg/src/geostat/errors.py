"""Exception hierarchy.

Errors are grouped by the CLI exit code they map to: configuration
problems (2), data problems (3) and numerical failures (4).
"""


class GeostatError(Exception):
    """Base class for all package errors."""


class ConfigError(GeostatError, ValueError):
    """Invalid configuration or argument outside its domain."""


class UnknownPreset(ConfigError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class InvalidSpec(ConfigError):
    """Variogram parameters violate their constraints."""


class DataError(GeostatError):
    """Problem with input data."""


class FileNotFound(DataError, FileNotFoundError):
    pass


class MissingColumn(DataError):
    def __init__(self, name):
        super().__init__(f"missing column: {name!r}")
        self.name = name


class BadCell(DataError):
    def __init__(self, row, col, raw=None):
        super().__init__(f"bad value {raw!r} at row {row}, column {col!r}")
        self.row = row
        self.col = col


class TooFewRows(DataError):
    pass


class LengthMismatch(DataError, ValueError):
    pass


class InvalidBounds(DataError, ValueError):
    pass


class IoError(DataError, OSError):
    pass


class InsufficientCalibration(DataError):
    pass


class AllBinsEmpty(DataError):
    pass


class NumericalError(GeostatError):
    """A numerical routine could not produce a usable answer."""


class FitFailed(NumericalError):
    pass


class DegenerateVariogram(FitFailed):
    """Best fit has (numerically) zero partial sill."""


class SingularSystem(NumericalError):
    pass


class CovarianceNotPD(NumericalError):
    pass


class NonPositiveAfterOffset(NumericalError, ValueError):
    pass

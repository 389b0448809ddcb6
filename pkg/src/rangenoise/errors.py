"""Exception hierarchy shared by all rangenoise modules."""


class RangeNoiseError(Exception):
    """Base class for every error raised by this package."""


class FormatError(RangeNoiseError, ValueError):
    """A file does not follow its declared format."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class TruncationError(FormatError):
    """Payload size disagrees with the header."""


class EstimationError(RangeNoiseError):
    """Noise estimation could not run on the given data."""


class InsufficientDataError(EstimationError):
    pass


class DegenerateError(RangeNoiseError, ValueError):
    """Input is geometrically or statistically degenerate."""


class FitError(RangeNoiseError):
    """Polynomial fit is underdetermined or rank deficient."""


class ConfigError(RangeNoiseError, ValueError):
    pass


class UnknownPresetError(RangeNoiseError, KeyError):
    def __str__(self):
        return str(self.args[0]) if self.args else ""

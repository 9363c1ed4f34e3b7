"""Exception types raised across the package."""


class ThinEdgeError(Exception):
    """Base class for all package errors."""


class ParseError(ThinEdgeError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(ThinEdgeError, ValueError):
    pass


class UnsupportedFormatError(FormatError):
    pass


class UnsupportedVersionError(FormatError):
    pass


class SpecError(ThinEdgeError, ValueError):
    """Invalid shape specification."""


class DegenerateError(ThinEdgeError, ValueError):
    """A neighborhood, projection, curve or fit has no usable structure."""

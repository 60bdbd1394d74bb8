"""Exception types shared across the toolkit."""


class EgogazeError(Exception):
    """Base class for all toolkit-specific errors."""


class CoordinateError(EgogazeError, ValueError):
    """Gaze or point coordinates fall outside the unit square."""


class DimensionError(EgogazeError, ValueError):
    """Array shapes or declared dimensions are inconsistent."""


class FrameGapError(EgogazeError, ValueError):
    """A fixation trace does not cover a contiguous frame range."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class ParseError(EgogazeError, ValueError):
    """A data file violates its documented format."""

    def __init__(self, message, path=None, line=None):
        if path is not None:
            location = str(path) if line is None else f"{path}:{line}"
            message = f"{location}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class ConvergenceError(EgogazeError, RuntimeError):
    """An iterative solver exhausted its iteration budget."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual

"""Exception hierarchy shared by every cdsal module."""


class SaliencyError(Exception):
    """Base class for all toolkit errors."""


class GeometryError(SaliencyError, ValueError):
    pass


class ParameterError(SaliencyError, ValueError):
    pass


class DimensionError(SaliencyError, ValueError):
    pass


class DegenerateInputError(SaliencyError, ValueError):
    """Raised when a metric or model receives input it cannot score (empty sets, constant maps)."""


class StructuralError(SaliencyError, ValueError):
    """Histograms with mismatched bins, values violating the [0, 1] contract, and similar."""


class SamplingError(SaliencyError, ValueError):
    pass


class FitError(SaliencyError, ValueError):
    pass


class ConfigError(SaliencyError, ValueError):
    pass


class ParseError(SaliencyError, ValueError):
    """Malformed input file.  Carries the file path and, when known, line and frame."""

    def __init__(self, message, path=None, line=None, frame=None):
        self.path = None if path is None else str(path)
        self.line = line
        self.frame = frame
        where = []
        if self.path is not None:
            where.append(self.path)
        if line is not None:
            where.append(f"line {line}")
        if frame is not None:
            where.append(f"frame {frame}")
        prefix = ":".join(where[:1]) + (" (" + ", ".join(where[1:]) + ")" if len(where) > 1 else "")
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.message = message

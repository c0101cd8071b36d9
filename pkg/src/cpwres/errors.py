"""Exception types raised across the package."""


class CpwresError(Exception):
    """Base class for all package errors."""


class DomainError(CpwresError, ValueError):
    """Argument outside the mathematical domain of a function."""


class DegenerateGeometryError(CpwresError, ValueError):
    """Point set does not determine a circle (collinear or coincident)."""


class DegenerateCircleError(DegenerateGeometryError):
    """Trace has no resolvable resonance circle."""


class UnphysicalParameterError(CpwresError, ValueError):
    """Parameter combination violates a physical constraint."""


class TraceFormatError(CpwresError, ValueError):
    """Malformed measurement file.  ``line`` is 1-based, or None."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if line is not None:
            where += f":{line}" if where else f"line {line}"
        super().__init__(f"{where}: {message}" if where else message)


class MalformedHeaderError(TraceFormatError):
    pass


class NonMonotonicGridError(TraceFormatError):
    pass


class NonFiniteSampleError(TraceFormatError):
    pass


class SchemaError(CpwresError, ValueError):
    """Structured input (manifest, config, record) violates its schema.

    ``field`` is a dotted/indexed path such as ``$[2].temperature_k``.
    """

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)

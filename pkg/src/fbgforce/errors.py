"""Exception hierarchy shared by every fbgforce module."""


class FbgError(Exception):
    """Base class for all errors raised by fbgforce."""


class InvariantViolation(FbgError, ValueError):
    pass


class NegativeDiscriminant(FbgError, ArithmeticError):
    """The strain shift lies below the vertex of the calibration parabola."""


class InsufficientData(FbgError, ValueError):
    pass


class DegenerateSystem(FbgError, ArithmeticError):
    pass


class ZeroDivisor(FbgError, ZeroDivisionError):
    pass


class NoOverlap(FbgError, ValueError):
    pass


class LengthMismatch(FbgError, ValueError):
    pass


class ParseError(FbgError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class MonotonicityError(ParseError):
    pass


class SchemaError(FbgError, ValueError):
    pass


class ConfigError(FbgError, ValueError):
    pass


class OutOfPlan(FbgError, ValueError):
    pass


class BindError(FbgError, OSError):
    pass


class ConnectError(FbgError, ConnectionError):
    pass


class ProtocolError(FbgError):
    def __init__(self, message: str, line: str | None = None):
        self.line = line
        if line is not None:
            message = f"{message}: {line!r}"
        super().__init__(message)

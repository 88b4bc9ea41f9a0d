"""Exception classes. The class name is what the CLI prints on failure."""


class AnidegError(Exception):
    pass


class DimensionMismatch(AnidegError, ValueError):
    pass


class NotStronglyMonotone(AnidegError):
    pass


class NotPositive(AnidegError):
    pass


class QuadratureFailure(AnidegError):
    pass


class InitialDatumOutOfRange(AnidegError, ValueError):
    pass


class SingularMode(AnidegError):
    pass


class NonFiniteField(AnidegError, FloatingPointError):
    pass


class EnergySafeguardExhausted(AnidegError):
    pass


class EstimateViolated(AnidegError):
    def __init__(self, message, record=None):
        super().__init__(message)
        self.record = record


class SlopeUndefined(AnidegError):
    pass


class MissingArtifact(AnidegError, FileNotFoundError):
    pass


class ParseError(AnidegError):
    def __init__(self, line, key, reason):
        self.line = line
        self.key = key
        self.reason = reason
        super().__init__(f"line {line}: {key}: {reason}")


class ValidationError(AnidegError, ValueError):
    def __init__(self, key, reason, line=None):
        self.key = key
        self.reason = reason
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{key}: {reason}")

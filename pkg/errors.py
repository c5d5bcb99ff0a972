class FptError(Exception):
    """Base class for every error raised by the passage-time library."""


class DomainError(FptError, ValueError):
    pass


class QuadratureError(FptError, ArithmeticError):
    pass


class ModelError(FptError, ValueError):
    pass


class VerificationError(FptError):
    pass


class ConfigError(FptError):
    def __init__(self, message: str, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


def require(condition, message, error=DomainError):
    if not condition:
        raise error(message)

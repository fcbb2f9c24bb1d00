from typing import Optional


class LtuError(Exception):
    """Base class of every error raised by `ltuscore`"""


class ArgumentError(LtuError, ValueError):
    """Invalid size, fraction, seed or other argument"""


class ParseError(ArgumentError):
    """
    A value could not be parsed

    Args:
        message (str): error description
        line (int, optional): 1-based line number of the offending row. Defaults to None.

    """

    def __init__(self, message: str, line: Optional[int] = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class SchemaError(ParseError):
    """Row arity or feature dimension does not match the header"""


class ConfigError(ArgumentError):
    """
    Invalid experiment configuration

    Args:
        key (str): configuration key path the error refers to
        message (str): error description

    """

    def __init__(self, key: str, message: str):
        super().__init__(f"`{key}`: {message}")
        self.key = key


class ShapeMismatchError(ArgumentError):
    """Models or vectors of incompatible shapes"""


class BoundViolationError(ArgumentError):
    """A loss value falls outside [0, 1]"""


class ProtocolError(LtuError):
    """The LTU protocol was violated, e.g. Defender and Reserved sets overlap"""


class TrainingError(LtuError, ArithmeticError):
    """Training diverged to non-finite parameters"""


class CapabilityError(LtuError, TypeError):
    """The model does not offer the requested white-box access"""


class DiscriminantError(LtuError, ArithmeticError):
    """A discriminant function returned a non-finite value"""


class RoundError(LtuError):
    """
    Error raised while playing one LTU round

    Args:
        index (int): round index
        cause (Exception): original error

    """

    def __init__(self, index: int, cause: Exception):
        super().__init__(f"round {index}: {cause}")
        self.index = index

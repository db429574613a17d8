"""Exception types shared across the package."""


class GnnMateError(Exception):
    """Base class for every error this package raises on purpose."""


class ShapeError(GnnMateError, ValueError):
    """Operand shapes do not conform to an operation's shape rules."""


class ContractError(GnnMateError, ValueError):
    """A documented precondition of an operation was violated."""


class TapeError(GnnMateError, RuntimeError):
    """Gradient requested for a value that is not connected to a live tape."""


class ParameterError(GnnMateError, ValueError):
    """Invalid argument to a dataset generator or extraction routine."""


class IngestionError(GnnMateError, ValueError):
    """A dataset file is missing, malformed, or fails validation."""

    def __init__(self, message, filename=None, line=None):
        loc = ""
        if filename is not None:
            loc = f" [{filename}" + (f":{line}" if line is not None else "") + "]"
        super().__init__(message + loc)
        self.filename = filename
        self.line = line


class FormatVersionError(IngestionError):
    """File declares a format version this code does not understand."""


class ConfigError(GnnMateError, ValueError):
    """Invalid or unknown key in a config file or CLI invocation."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class TrainingDiverged(GnnMateError, RuntimeError):
    """Non-finite loss encountered; carries a diagnostic dump of the step."""

    def __init__(self, message, dump=None):
        super().__init__(message)
        self.dump = dump or {}

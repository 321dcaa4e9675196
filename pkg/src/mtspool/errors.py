"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Operand shapes do not satisfy an operation's contract."""


class ContractError(RuntimeError):
    """An API was used outside its documented contract."""


class ConfigurationError(ValueError):
    """A configuration value is invalid for the data it is applied to."""


class TsParseError(ValueError):
    """A .ts file violates the expected grammar.

    Carries the 1-based line number of the offending line when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line

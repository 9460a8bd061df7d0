"""Exception hierarchy shared across the package."""


class HisRESError(Exception):
    pass


class DimensionError(HisRESError, ValueError):
    """Operand shapes do not line up."""


class NonFiniteError(HisRESError, FloatingPointError):
    """An op produced NaN or Inf."""


class ConfigError(HisRESError, ValueError):
    pass


class DataError(HisRESError, ValueError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class CheckpointError(HisRESError):
    pass

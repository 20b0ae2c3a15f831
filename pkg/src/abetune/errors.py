"""Exception hierarchy shared by every abetune module."""


class AbetuneError(Exception):
    """Base class for all errors raised by abetune."""


class DataError(AbetuneError):
    """Problems with input data (files, tables, samples)."""


class MalformedCsv(DataError):
    pass


class NonPositiveEffort(DataError):
    pass


class EmptyDataset(DataError):
    pass


class DatasetTooSmall(DataError):
    pass


class InsufficientRows(DataError):
    pass


class LengthMismatch(AbetuneError, ValueError):
    pass


class ConfigError(AbetuneError):
    """Problems with feature models or configurations."""


class ParseError(ConfigError):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DanglingConstraint(ConfigError):
    pass


class MultipleParents(ConfigError):
    pass


class InvalidSlotIndex(ConfigError, ValueError):
    pass


class NoValidConfiguration(ConfigError):
    pass


class InvalidConfiguration(ConfigError, ValueError):
    pass


class EvalError(AbetuneError, ValueError):
    """Problems with metric or statistical-test inputs."""


class NonPositiveActual(EvalError):
    pass


class EmptyInput(EvalError):
    pass


class SampleTooSmall(EvalError):
    pass

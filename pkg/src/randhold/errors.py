"""Exception hierarchy shared by every module of the package."""


class ParameterError(ValueError):
    """A parameter is outside its admissible range."""


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class DimensionError(ValueError):
    """Array shapes are incompatible with an operation."""


class InvariantError(ValueError):
    """A structural assumption on the inputs does not hold."""


class ContractError(ValueError):
    """Two inputs that must agree (mesh/grid, mesh/path) do not."""


class NumericalError(ArithmeticError):
    """A trajectory produced a non-finite value."""

    def __init__(self, message, time=None):
        super().__init__(message if time is None else f"{message} (t={time!r})")
        self.time = time


class FitError(ValueError):
    """A rate fit was requested on inadmissible data."""


class SweepError(RuntimeError):
    """Too many replications of a sweep were aborted."""


class ConfigError(ValueError):
    """A configuration document is malformed; ``key`` names the offending entry."""

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class OutputError(OSError):
    """A report file could not be written; ``path`` names it."""

    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = str(path)

"""Exception hierarchy shared by all modules."""


class MicrolocError(Exception):
    """Base class. ``exit_code`` is used by the command-line front end."""

    exit_code = 3


class OutOfDomain(MicrolocError):
    pass


class DegenerateMetric(MicrolocError):
    pass


class SolverDiverged(MicrolocError):
    """An iterative solver gave up. Means "no result", not "no solution"."""


class NotInNormalNeighbourhood(MicrolocError):
    pass


class LeftDomain(MicrolocError):
    pass


class NonNullStart(MicrolocError):
    pass


class KernelViolation(MicrolocError):
    pass


class FactorizationFailed(MicrolocError):
    pass


class NotRecognized(MicrolocError):
    exit_code = 2


class GridTooCoarse(MicrolocError):
    exit_code = 2


class WindowTooWide(MicrolocError):
    exit_code = 2


class ConfigError(MicrolocError):
    """Malformed or incomplete run configuration."""

    exit_code = 2

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

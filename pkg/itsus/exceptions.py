"""
Errors raised by the itsus toolkit.

Every error carries the process exit code that the management commands use when the
error reaches the command line.
"""


class ItsUsError(Exception):
    """
    Base class of all the toolkit errors.
    """

    exit_code = 1


class ConfigError(ItsUsError):
    """
    A run configuration could not be parsed. `field` is the dotted path of the offending entry.
    """

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class UnknownSurface(ConfigError):
    def __init__(self, name):
        super().__init__("surface.name", f"unknown surface '{name}'")


class InvalidParameter(ConfigError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"surface.params.{key}", message)


class DimensionMismatch(ItsUsError):
    pass


class SimulationDiverged(ItsUsError):
    """
    The integrator met a non finite force.
    """

    exit_code = 2

    def __init__(self, coords, window_id=None, step=None):
        self.coords = coords
        self.window_id = window_id
        self.step = step
        super().__init__(
            f"simulation diverged in window {window_id} at step {step} with coords {coords!r}"
        )


class CalibrationNotConverged(ItsUsError):
    exit_code = 3


class NonPositivePartition(ItsUsError):
    pass


class EmptySchedule(ItsUsError):
    pass


class MismatchedLengths(ItsUsError):
    pass


class MissingCV(ItsUsError):
    pass


class EmptyWindow(ItsUsError):
    pass


class InvalidSamples(ItsUsError):
    pass


class WhamNotConverged(ItsUsError):
    exit_code = 2


class SamplesOutsideGrid(ItsUsError):
    pass


class TooFewSamples(ItsUsError):
    pass


class DomainTooSmall(ItsUsError):
    pass


class IncompatibleGrids(ItsUsError):
    pass


class ToleranceExceeded(ItsUsError):
    exit_code = 4


class DriftDetected(ItsUsError):
    exit_code = 5


class OracleNotConverged(ToleranceExceeded):
    """
    A quadrature PMF moved by more than its tolerance when the resolution was doubled.
    """

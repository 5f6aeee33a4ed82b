"""Exception types raised across the package."""


class HifError(Exception):
    """Base class for all package errors."""


class ShapeError(HifError, ValueError):
    pass


class ParameterError(HifError, ValueError):
    pass


class DegeneracyError(HifError, ValueError):
    """Trajectory collapses to a line (phase 0 or pi) or a channel is constant."""


class SingularFitError(DegeneracyError):
    pass


class SolverError(HifError, RuntimeError):
    pass


class SamplingError(HifError, ValueError):
    pass


class TopologyError(HifError, ValueError):
    pass


class ScheduleError(HifError, ValueError):
    pass


class DivergenceError(HifError, FloatingPointError):
    pass


class NumericalError(HifError, FloatingPointError):
    pass


class CalibrationError(HifError, ValueError):
    pass


class ConfigurationError(HifError, ValueError):
    pass


class AlignmentError(HifError, ValueError):
    pass


class RankError(HifError, ValueError):
    pass


class SizeError(HifError, ValueError):
    pass

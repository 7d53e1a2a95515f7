"""Exceptions raised by the solver.  All numerical failures share one base."""


class ManpError(Exception):
    pass


class NumericalFailure(ManpError):
    """Base for failures that abort a time-stepping run."""


class NonPositiveSolvent(NumericalFailure):
    pass


class NonPositiveConcentration(NumericalFailure):
    pass


class PositivityLost(NumericalFailure):
    pass


class SolverDiverged(NumericalFailure):
    pass


class NotConverged(NumericalFailure):
    """Relaxation hit its sweep cap.  ``field`` and ``report`` hold the partial result."""

    def __init__(self, message, field=None, report=None):
        super().__init__(message)
        self.field = field
        self.report = report


class NonNeutral(ManpError):
    pass


class ConfigError(ManpError):
    pass

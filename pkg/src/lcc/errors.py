"""Exception types raised by the analysis modules."""


class LccError(Exception):
    """Base class; the CLI maps any subclass to exit status 2."""


class EquilibriumOutOfRange(LccError):
    pass


class DegenerateEquilibrium(LccError):
    pass


class InvalidTopology(LccError):
    pass


class GainIndexOutOfRange(LccError):
    pass


class EigSolverFailure(LccError):
    pass


class PoleAtEvaluationPoint(LccError):
    pass


class PoleOnImaginaryAxis(LccError):
    pass


class AxesMismatch(LccError):
    pass


class NonFiniteState(LccError):
    pass


class NegativeSpacing(LccError):
    """Two vehicles collided during a nonlinear run."""

    def __init__(self, message, time=None, vehicle=None):
        super().__init__(message)
        self.time = time
        self.vehicle = vehicle

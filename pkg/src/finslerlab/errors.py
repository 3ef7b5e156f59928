"""Exception hierarchy shared by every module."""


class FinslerError(Exception):
    """Base class for all errors raised by finslerlab."""


class EvaluationOutsideDomain(FinslerError):
    pass


class ZeroVector(FinslerError):
    pass


class UnsupportedOrder(FinslerError):
    pass


class InvalidRanders(FinslerError):
    pass


class SingularTensor(FinslerError):
    pass


class DegenerateFlag(FinslerError):
    pass


class GeodesicExtensionFailed(FinslerError):
    pass


class IntegrationFailure(FinslerError):
    pass


class DomainExit(FinslerError):
    """A path reached the chart margin before the requested end time."""

    def __init__(self, message, exit_time):
        super().__init__(message)
        self.exit_time = exit_time


class NewtonDivergence(FinslerError):
    pass


class StencilOutsideDomain(FinslerError):
    pass


class BlowUp(FinslerError):
    """A Riccati solution escaped to infinity (a focal time)."""

    def __init__(self, message, time):
        super().__init__(message)
        self.time = time


class SpanMismatch(FinslerError):
    pass


class QuadratureFailure(FinslerError):
    pass


class HypothesisViolated(FinslerError):
    """A checked hypothesis failed; ``which`` names it and ``witness`` shows where."""

    def __init__(self, which, witness=None):
        super().__init__(f"hypothesis violated: {which}")
        self.which = which
        self.witness = witness

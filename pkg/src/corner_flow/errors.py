"""Exception hierarchy shared by all modules."""


class CornerFlowError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for it."""

    exit_code = 1


class ConfigError(CornerFlowError):
    exit_code = 2


class NonConvergence(CornerFlowError):
    """A Newton solve for an implicit map did not converge."""

    exit_code = 10


class NoConvergence(CornerFlowError):
    """The nonlinear iteration hit its iteration cap without contracting."""

    exit_code = 3

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InstabilityDetected(CornerFlowError):
    exit_code = 4


class CFLViolation(CornerFlowError):
    exit_code = 4


class VacuumReached(CornerFlowError):
    exit_code = 5


class PreconditionViolated(CornerFlowError):
    exit_code = 6

    def __init__(self, message, boundary=None):
        super().__init__(message)
        self.boundary = boundary


class KernelUnderresolved(CornerFlowError):
    exit_code = 7


class OrderUnavailable(CornerFlowError):
    exit_code = 8


class NotHyperbolic(CornerFlowError):
    exit_code = 9

"""Finite-difference toolkit for small potential-flow perturbations in a curved corner."""

from .errors import (CFLViolation, ConfigError, CornerFlowError, InstabilityDetected,
                     KernelUnderresolved, NoConvergence, NonConvergence, NotHyperbolic,
                     OrderUnavailable, PreconditionViolated, VacuumReached)

__version__ = "0.1.0"

__all__ = [
    "CFLViolation", "ConfigError", "CornerFlowError", "InstabilityDetected", "KernelUnderresolved",
    "NoConvergence", "NonConvergence", "NotHyperbolic", "OrderUnavailable", "PreconditionViolated",
    "VacuumReached", "__version__",
]

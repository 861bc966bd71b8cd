"""Exception hierarchy.

Every numerical failure derives from :class:`NumericalError` and every
caller-side contract breach from :class:`ContractViolation`; the CLI maps the
two families onto distinct exit codes.
"""

from __future__ import annotations


class ZSError(Exception):
    """Base class for all package errors."""


class SpecError(ZSError, ValueError):
    """A constructor record or input file does not describe a valid object."""


class ContractViolation(ZSError, ValueError):
    """A precondition of an operation was violated by the caller."""


class NumericalError(ZSError, ArithmeticError):
    """A numerical procedure failed to deliver a result within tolerance."""


# potentials
class DomainError(NumericalError):
    """Evaluation requested inside the exclusion radius of a known pole."""


class PoleRefinementError(NumericalError):
    pass


class DivisionByZeroPotential(NumericalError):
    pass


# contour / ODE
class NoValidContour(NumericalError):
    pass


class StepSizeUnderflow(NumericalError):
    pass


class WrongHalfPlane(ContractViolation):
    pass


# scattering
class DegenerateWronskian(NumericalError):
    pass


class MissingPartner(ContractViolation):
    pass


class IncompleteData(ContractViolation):
    pass


class UnsupportedOrder(ContractViolation):
    pass


# spectrum
class BoundaryZero(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class ClusterUnresolved(NumericalError):
    pass


# reconstruction
class InsufficientDerivatives(ContractViolation):
    pass


class SingularSystem(NumericalError):
    def __init__(self, message: str, condition: float = float("inf"), x=None):
        super().__init__(message)
        self.condition = condition
        self.x = x


class PoleCollision(ContractViolation):
    pass


class NotReflectionless(NumericalError):
    pass

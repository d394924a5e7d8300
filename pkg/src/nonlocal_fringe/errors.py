"""Exception hierarchy shared by every module of the package."""


class FringeError(Exception):
    """Base class for all package errors."""


class InputError(FringeError, ValueError):
    """Bad parameters or configuration (CLI exit code 2)."""


class NumericError(FringeError, ArithmeticError):
    """Numeric failure such as a singularity (CLI exit code 3)."""


class CutoffMismatchError(InputError):
    pass


class InvalidStateError(InputError):
    """A density matrix violates Hermiticity, unit trace or positivity."""


class TruncationError(InputError):
    """An operation would move population outside the truncated Fock space."""


class StructureError(InputError):
    """A state lacks the matrix structure an operation requires."""


class DomainError(InputError):
    pass


class UndefinedVisibilityError(NumericError):
    pass


class SingularityError(NumericError):
    pass


class UnboundedOptimumError(NumericError):
    pass


class InsufficientDurationError(InputError):
    pass


class UnlockedError(NumericError):
    """Raised when a lock condition is not satisfied; carries the residuals."""

    def __init__(self, residuals):
        self.residuals = dict(residuals)
        detail = ", ".join(f"{k}={v:.3e} rad" for k, v in self.residuals.items())
        super().__init__(f"lock conditions violated: {detail}")


class FitError(InputError):
    """The data cannot determine a fringe fit (e.g. too few distinct phases)."""


class StreamFormatError(InputError):
    """Malformed event-stream text; carries the 1-based line number."""

    def __init__(self, line_no: int, text: str, reason: str):
        self.line_no = line_no
        super().__init__(f"line {line_no}: {reason}: {text!r}")

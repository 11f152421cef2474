"""Exception hierarchy.

Two families matter to callers (and to the CLI exit codes): input that is
malformed or outside a supported case (``ValidationError``, exit 2) and
parameters that are well-formed but admit no feasible or equilibrium-stable
answer (``InfeasibleError``, exit 3).
"""


class CapflpError(Exception):
    pass


class ValidationError(CapflpError, ValueError):
    pass


class EmptyInput(ValidationError):
    pass


class OutOfRange(ValidationError):
    pass


class NonFinite(ValidationError):
    pass


class InvalidParams(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class UnsupportedArity(ValidationError):
    pass


class UnsupportedCase(ValidationError):
    pass


class PreconditionViolated(ValidationError):
    pass


class TooLarge(ValidationError):
    pass


class InfeasibleError(CapflpError):
    pass


class Infeasible(InfeasibleError):
    pass


class CapacityInfeasible(Infeasible):
    pass


class NotES(InfeasibleError):
    pass

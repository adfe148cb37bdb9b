"""Exception hierarchy shared by all modules."""


class NLBurgersError(Exception):
    """Base class for every error raised by the package."""


class KernelError(NLBurgersError):
    pass


class DominationFailure(KernelError):
    """|G| is nonzero where K vanishes, so no finite C_GK exists."""


class NonIntegrable(KernelError):
    """A moment integral does not settle on the truncation ladder."""


class DegenerateKernel(KernelError):
    pass


class GridMismatch(NLBurgersError, ValueError):
    pass


class ConfigInvalid(NLBurgersError, ValueError):
    pass


class NonFinite(NLBurgersError, FloatingPointError):
    """The discrete solution left the finite range (time step too large)."""


class MassDrift(NLBurgersError):
    pass


class OutOfRange(NLBurgersError, ValueError):
    pass


class RangeError(NLBurgersError, ValueError):
    pass


class NoAdmissibleConstant(NLBurgersError):
    pass


class DegenerateMass(NLBurgersError):
    pass


class BisectionFailure(NLBurgersError):
    pass


class NonPositiveTime(NLBurgersError, ValueError):
    pass


class NegativityViolation(NLBurgersError, ValueError):
    pass


class InsufficientData(NLBurgersError, ValueError):
    pass


class MassMismatch(NLBurgersError, ValueError):
    pass


class PreconditionViolation(NLBurgersError, ValueError):
    pass

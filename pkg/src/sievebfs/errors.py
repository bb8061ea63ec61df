"""Exception hierarchy shared by every module of the package."""


class SieveBfsError(Exception):
    pass


class ContractViolation(SieveBfsError, ValueError):
    """Operands violate a precondition (length mismatch, bad index, ...)."""


class CapacityError(SieveBfsError, OverflowError):
    pass


class ConfigurationError(SieveBfsError, ValueError):
    pass


class DecodeError(SieveBfsError, ValueError):
    """A wire message or compressed word stream is malformed."""


class FabricError(SieveBfsError, RuntimeError):
    pass


class DeadlockError(FabricError):
    """A collective did not complete because some rank never arrived."""


class ValidationError(SieveBfsError, AssertionError):
    pass

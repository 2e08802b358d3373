"""Exception hierarchy shared by all modules."""


class HyperHeatError(Exception):
    """Base class for every error raised by the package."""


class ValidationError(HyperHeatError, ValueError):
    """A precondition on the inputs was violated."""


class DimensionError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class NonpositiveTimeError(ValidationError):
    pass


class EvenDimensionUnsupported(ValidationError):
    pass


class DegenerateGridError(ValidationError):
    pass


class GridMismatchError(ValidationError):
    pass


class EmptyRegionError(ValidationError):
    pass


class OutOfConeError(ValidationError):
    pass


class NonintegrableDataError(ValidationError):
    pass


class UnknownExperimentError(ValidationError):
    pass


class UsageError(ValidationError):
    pass


class MassDeficitError(HyperHeatError):
    pass


class QuadratureNonconvergence(HyperHeatError):
    pass


class InstabilityDetected(HyperHeatError):
    pass


class HorizonViolation(HyperHeatError):
    pass

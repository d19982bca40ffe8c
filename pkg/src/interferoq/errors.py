class InterferoqError(Exception):
    """Base class for all library errors."""


class DimensionLimitError(InterferoqError):
    pass


class DimensionMismatch(InterferoqError):
    pass


class WireKindMismatch(InterferoqError):
    pass


class SpecMismatch(InterferoqError):
    pass


class NormalizationError(InterferoqError):
    pass


class NonSymmetricInput(InterferoqError):
    pass


class NotInSector(InterferoqError):
    pass


class CutoffTooSmall(InterferoqError):
    pass


class NonUnitAxis(InterferoqError):
    pass


class NonHermitianObservable(InterferoqError):
    pass


class OutsideSubspace(InterferoqError):
    pass


class ClassicalError(InterferoqError):
    """Missing classical label or a value outside a classical gate's alphabet."""


class MalformedCircuit(InterferoqError):
    pass


class NotMeasurementFree(InterferoqError):
    pass


class DeferralError(InterferoqError):
    pass


class IncompatibleQuery(InterferoqError):
    pass


class DegenerateOperatingPoint(InterferoqError):
    pass


class UnsupportedParameter(InterferoqError):
    pass

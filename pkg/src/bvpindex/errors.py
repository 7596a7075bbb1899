"""Exception hierarchy for bvpindex."""


class BvpIndexError(Exception):
    """Base class for all errors raised by this package."""


class MalformedSymbolError(BvpIndexError):
    pass


class ShapeError(BvpIndexError):
    pass


class IncompatibleSumError(BvpIndexError):
    pass


class NormalizationError(BvpIndexError):
    pass


class EllipticityMarginError(BvpIndexError):
    """An ODE root lies within the ellipticity margin of the real axis."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class DiscontinuityError(BvpIndexError):
    pass


class OrderError(BvpIndexError):
    pass


class CannotRotateError(BvpIndexError):
    pass


class InvalidCutoffError(BvpIndexError):
    pass


class SpectralCutError(BvpIndexError):
    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class NumericalInconsistencyError(BvpIndexError):
    pass


class PreconditionError(BvpIndexError):
    pass


class AdmissibilityError(BvpIndexError):
    pass


class UnsupportedClassError(BvpIndexError):
    pass


class GeometryError(BvpIndexError):
    pass


class PairingError(BvpIndexError):
    pass


class CapabilityError(BvpIndexError):
    pass


class ToleranceError(BvpIndexError):
    pass


class ProblemFileError(BvpIndexError):
    """Problem-definition file could not be parsed; ``location`` is a JSON path."""

    def __init__(self, message, location="$"):
        super().__init__(f"{location}: {message}")
        self.location = location

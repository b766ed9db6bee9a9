"""Exception types raised across the package."""


class QcaDecError(Exception):
    """Base class for all package errors."""


class NonConvergence(QcaDecError):
    pass


class NotCommutative(QcaDecError):
    pass


class NotCommuting(QcaDecError):
    pass


class NotFactor(QcaDecError):
    pass


class DimensionMismatch(QcaDecError):
    pass


class RouteViolation(QcaDecError):
    pass


class Inconsistent(QcaDecError):
    pass


class PreconditionFailed(QcaDecError):
    pass


class SizeTooSmall(PreconditionFailed):
    pass


class RadiusCheckFailed(QcaDecError):
    pass


class FactorSplitFailed(QcaDecError):
    pass


class DephasingObstruction(QcaDecError):
    pass


class NotInnerLocal(QcaDecError):
    pass


class NotTranslationInvariant(QcaDecError):
    pass


class NoShift(QcaDecError):
    pass

"""Exception types shared across the package."""


class HamciError(Exception):
    pass


class OddDimension(HamciError):
    pass


class BadExponent(HamciError):
    pass


class TooFewSlices(HamciError):
    pass


class NotUnitVector(HamciError):
    pass


class PlacementFailed(HamciError):
    pass


class BadRho(HamciError):
    pass


class EllTooSmallForGrid(HamciError):
    pass


class GridUnderResolved(HamciError):
    pass


class NonZeroMean(HamciError):
    pass


class AliasedLambda(HamciError):
    pass


class ExponentHypothesisViolated(HamciError):
    pass


class ProfileConstraintViolated(HamciError):
    pass


class StepTooLarge(HamciError):
    pass


class NegativeDensity(HamciError):
    pass


class WrongInitializer(HamciError):
    pass


class ParseError(HamciError):
    pass


class ValidationError(HamciError):
    pass


class FormatError(HamciError):
    pass


class IoError(HamciError):
    pass

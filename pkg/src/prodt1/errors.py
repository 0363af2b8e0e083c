"""Exception types raised across the package."""


class Prodt1Error(Exception):
    pass


class EmptySpace(Prodt1Error):
    pass


class NegativeWeight(Prodt1Error):
    pass


class UnknownPoint(Prodt1Error, KeyError):
    pass


class DeltaTooLarge(Prodt1Error, ValueError):
    pass


class GenerationOutOfRange(Prodt1Error, IndexError):
    pass


class UnknownIndex(Prodt1Error, KeyError):
    pass


class BadCubeEntry(Prodt1Error, ValueError):
    pass


class MismatchedDelta(Prodt1Error, ValueError):
    pass


class BallTooSmall(Prodt1Error, ValueError):
    pass


class NotAdjacentScales(Prodt1Error, ValueError):
    pass


class OutsideBidisc(Prodt1Error, ValueError):
    pass


class NotRectUnion(Prodt1Error, ValueError):
    pass


class ConfigError(Prodt1Error, ValueError):
    pass

"""Exception hierarchy shared by all modules."""


class ConeWalkError(Exception):
    """Base class for every error raised by this package."""


class InvalidPath(ConeWalkError, ValueError):
    pass


class NonPositivePath(InvalidPath):
    pass


class OriginHit(ConeWalkError, ValueError):
    """A node lies too close to the puncture for its angle to be meaningful."""


class StepTooCoarse(ConeWalkError, ValueError):
    """Consecutive nodes turn by pi/2 or more around the origin; refine the grid."""


class OutsideCone(ConeWalkError, ValueError):
    pass


class NonMonotone(ConeWalkError, ValueError):
    pass


class DerivativeUnavailable(ConeWalkError, ValueError):
    pass


class BadSplitPoint(ConeWalkError, ValueError):
    pass


class MeshTooCoarse(ConeWalkError, ValueError):
    pass


class UnstableStep(ConeWalkError, RuntimeError):
    pass

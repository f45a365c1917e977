"""Exception hierarchy shared by all dnkg modules.

Everything derives from DnkgError so the CLI can map domain failures to a
single exit code.
"""


class DnkgError(Exception):
    """Base class for all domain errors raised by this package."""


class InvalidParams(DnkgError):
    pass


class NoConvergence(DnkgError):
    pass


class FitUnstable(DnkgError):
    pass


class NoNegativeEigenvalue(DnkgError):
    pass


class DiscretizationTooCoarse(DnkgError):
    pass


class DegenerateConfiguration(DnkgError):
    pass


class QuadratureError(DnkgError):
    pass


class ConfigurationTooClose(DnkgError):
    pass


class DimensionTooSmall(DnkgError):
    pass


class UnknownName(DnkgError):
    pass


class RankDeficient(DnkgError):
    pass


class CollisionDetected(DnkgError):
    """A reduced trajectory reached the pair-distance floor.

    Carries the collision time and the trajectory recorded so far so callers
    can report collapse instead of losing the run.
    """

    def __init__(self, message, t=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class NotAdmissible(DnkgError):
    pass


class WindowTooShort(DnkgError):
    pass


class BlowupDetected(DnkgError):
    def __init__(self, message, t=None):
        super().__init__(message)
        self.t = t


class UnstableStep(DnkgError):
    pass


class NewtonDiverged(DnkgError):
    pass


class GuessTooFar(DnkgError):
    pass


class GramSingular(DnkgError):
    pass


class NoSignChange(DnkgError):
    pass


class HorizonTooShort(DnkgError):
    pass

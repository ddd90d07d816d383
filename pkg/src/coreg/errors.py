"""Exception types raised by the registration engine."""


class CoregError(Exception):
    """Base class for every error raised by :mod:`coreg`."""


class PullbackError(CoregError):
    """A pullback feature file or in-memory pullback is invalid."""


class MalformedRecord(PullbackError):
    pass


class EmptyPullback(PullbackError):
    pass


class NonMonotoneIndex(PullbackError):
    pass


class MissingEdFlags(PullbackError):
    pass


class DegenerateVessel(CoregError):
    """Maximum lumen area is not positive, so features cannot be normalized."""


class TooFewFrames(CoregError):
    pass


class NoAnchors(CoregError):
    """No frame pair carries side-branch or calcium signal."""


class InstanceTooLarge(CoregError):
    """Brute-force oracle refused an instance that is too big to enumerate."""


class InvalidConfig(CoregError):
    pass


class LengthMismatch(CoregError):
    pass


class TooFewSamples(CoregError):
    pass


class ZeroVariance(CoregError):
    pass


class EmptyInput(CoregError):
    pass

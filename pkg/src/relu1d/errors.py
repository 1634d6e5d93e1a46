"""Exception hierarchy shared across the package."""


class Relu1dError(Exception):
    """Base class for every error raised by this package."""


class InvalidValue(Relu1dError, ValueError):
    """A numeric input was non-finite or otherwise unusable."""


class ShapeError(Relu1dError, ValueError):
    pass


class InvariantError(Relu1dError):
    """An object violated an invariant that the caller was required to uphold."""


class InvalidInterval(Relu1dError, ValueError):
    pass


class InvalidSigma(Relu1dError, ValueError):
    pass


class InvalidLayer(Relu1dError, ValueError):
    pass


class InvalidVariance(Relu1dError, ValueError):
    pass


class InvalidCorrelation(Relu1dError, ValueError):
    pass


class FirstLayerAffine(Relu1dError, ValueError):
    """Crossing statistics were requested for the (affine) first layer."""


class NothingToPropagate(Relu1dError, ValueError):
    """Survival statistics need at least one hidden layer downstream."""


class ConfigMismatch(Relu1dError, ValueError):
    pass


class InvalidConfig(Relu1dError, ValueError):
    pass


class InvalidTolerance(Relu1dError, ValueError):
    pass


class InsufficientSamples(Relu1dError, ValueError):
    pass


class InvalidComplexity(Relu1dError, ValueError):
    pass


class DomainError(Relu1dError, ValueError):
    pass

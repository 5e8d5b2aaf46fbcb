"""Exception types raised across the package."""


class EmtTsError(Exception):
    """Base class for every error raised by emtts."""


class NumericalError(EmtTsError):
    pass


class SingularMatrix(NumericalError):
    pass


class NoConvergence(NumericalError):
    pass


class InsufficientSamples(NumericalError):
    pass


class SingularH(NumericalError):
    """The per-step system matrix could not be factorized."""


class DisconnectedCircuit(EmtTsError):
    pass


class UnsupportedComponent(EmtTsError):
    pass


class EmptyExternalSet(EmtTsError):
    """Raised (or warned) when two subdomains do not exchange any value."""


class SingularSubdomain(NumericalError):
    pass


class RankDeficientTrace(NumericalError):
    pass


class UnitEigenvalue(NumericalError):
    pass


class ConfigError(EmtTsError):
    pass


class DecoupledPartitionWarning(UserWarning):
    pass


class RankDeficientWarning(UserWarning):
    pass

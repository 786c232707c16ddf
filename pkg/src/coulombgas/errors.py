"""Exception types shared across the package."""


class CoulombGasError(Exception):
    """Base class for all package errors."""


class UnboundedDomain(CoulombGasError):
    pass


class DomainMismatch(CoulombGasError):
    pass


class NotHermitian(CoulombGasError):
    pass


class NoConvergence(CoulombGasError):
    pass


class BadSettings(CoulombGasError):
    pass


class NonNormalized(CoulombGasError):
    pass


class NonConfining(CoulombGasError):
    pass


class InfiniteEntropy(CoulombGasError):
    pass


class InsufficientChains(CoulombGasError):
    pass


class ConfigParse(CoulombGasError):
    pass


class NonMonotoneWarning(UserWarning):
    """Estimated Gamma' increases in alpha beyond its error bars."""

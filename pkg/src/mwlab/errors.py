"""Exception taxonomy shared across the laboratory modules."""


class MWLabError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(MWLabError):
    """A field was evaluated at a point outside its domain."""


class NotPSD(MWLabError):
    """A matrix violated the positive-semidefinite tolerance."""


class QuadratureNonConvergence(MWLabError):
    """Successive quadrature refinements disagree at the maximum level."""


class Degenerate(MWLabError):
    """A norm functional or denominator vanished."""


class SingularSample(MWLabError):
    """Too many sampled matrix values were numerically singular."""


class BracketFailure(MWLabError):
    """The auxiliary-function criterion never crossed 1 inside the scan bracket."""


class EllipticityViolation(MWLabError):
    """A leading coefficient left the declared ellipticity interval."""


class NoConvergence(MWLabError):
    """An iterative solver exhausted its iteration budget."""


class InsufficientSamples(MWLabError):
    """Not enough admissible samples for a fit."""


class ConfigError(MWLabError):
    """An experiment configuration could not be parsed or validated."""

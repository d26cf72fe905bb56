"""Error taxonomy shared across the package."""


class NumericsError(Exception):
    """Base class for every failure this package raises deliberately."""


class NotResolved(NumericsError):
    """Requested polynomial degrees leave the sampled function under-resolved."""


class NotMonotone(NumericsError):
    """Monotone inversion requested on a branch where the derivative changes sign."""


class NoConvergence(NumericsError):
    """Damped fixed-point iteration failed to reach the requested tolerance."""


class OutOfDomain(NumericsError):
    """Evaluation or mapping requested outside the represented domain."""


class DomainError(NumericsError):
    """Arguments leave the domain on which a derived function is defined."""


class NotRenormalizable(NumericsError):
    """The restrictive-interval conditions fail for the given map."""


class NotFound(NumericsError):
    """A requested dynamical object (fixed point, saddle) could not be located."""


class TowerTooShallow(NumericsError):
    """The renormalization tower has fewer levels than the request needs."""


class SingularJacobian(NumericsError):
    """The Jacobian vanishes (degenerate map) where a nonzero value is required."""


class UnderflowFrozen(NumericsError):
    """A deviation field was frozen to zero, so the requested quantity is not defined."""


class DegenerateDerivative(NumericsError):
    """A derivative matrix lost the structure the decomposition relies on."""


class HypothesisFailed(NumericsError):
    """A quantitative hypothesis of a certified estimate does not hold."""


class NotToyModel(NumericsError):
    """An operation restricted to skew-product maps was called on a general map."""

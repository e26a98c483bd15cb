"""Exception types shared across the package."""


class DriftPamError(Exception):
    """Base class for package errors."""


class ConfigError(DriftPamError):
    """Bad or unknown configuration input."""


class BeyondCritical(DriftPamError):
    """A rate beta was supplied at or beyond the critical drift rate."""


class DivergentFunctional(DriftPamError):
    """The hitting functional recursion blew up (beta effectively
    past the critical rate for the supplied environment)."""


class NumericalFailure(DriftPamError):
    """An iteration failed to converge or a consistency check failed."""

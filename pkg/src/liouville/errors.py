"""Exception types shared across the package."""


class LiouvilleError(Exception):
    """Base class for all errors raised by this package."""


class PrecisionExhausted(LiouvilleError):
    """An enclosure stayed too wide to decide a strict inequality.

    ``needed`` names the refinement that would have been required (bits, terms, ...)
    and ``partial`` carries whatever was certified before giving up.
    """

    def __init__(self, message, needed=None, partial=None):
        super().__init__(message)
        self.needed = needed
        self.partial = partial


class BudgetExceeded(LiouvilleError):
    """An operand would exceed the configured bit budget."""

    def __init__(self, message, bits=None, budget=None):
        super().__init__(message)
        self.bits = bits
        self.budget = budget


class RationalHit(LiouvilleError):
    """A norm evaluated to exactly zero: the input is certifiably rational."""


class DomainError(LiouvilleError):
    """An argument lies outside the domain of the operation."""


class PoleError(DomainError):
    """A rational function was evaluated at (or too near) a pole."""


class InvalidDeletion(LiouvilleError):
    """A deletion set removes a partial quotient that must be kept."""


class SufficiencyCheckFailed(LiouvilleError):
    """The runtime replacement for the threshold nu_0(P) did not hold."""


class CertificateInvalid(LiouvilleError):
    """A serialized certificate does not re-verify."""

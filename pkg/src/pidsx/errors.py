"""Semantic exception hierarchy.

Every error raised by pidsx derives from :class:`PidsxError`, so callers can
catch the whole family with one clause.  Public functions never raise bare
``ValueError`` for contract violations.
"""


class PidsxError(Exception):
    """Base class for all pidsx errors."""


class CapExceeded(PidsxError):
    """Source count or table size outside the supported desk-scale range."""


class IncompleteInput(PidsxError):
    """A required key (e.g. an antichain) is missing from an input mapping."""


class SpecSyntaxError(PidsxError):
    """Spec document is not well-formed JSON or misses required structure."""

    def __init__(self, message: str, location: str | None = None):
        self.location = location
        if location:
            message = f"{message} (at {location})"
        super().__init__(message)


class ValidationError(PidsxError):
    """Structural invariant violated: normalization, dimensions, PSD, support."""


class SingularityError(PidsxError):
    """Covariance singular or too ill-conditioned for density evaluation."""


class UndefinedPoint(PidsxError):
    """Local quantity is undefined at the requested realization."""


class AllSliceWeightsZero(PidsxError):
    """Conditioning realization lies outside the support of the law."""


class DivergentIntegral(PidsxError):
    """Integrand is infinite on a set of positive measure."""


class ConfigError(PidsxError):
    """Integration method incompatible with the distribution kind."""


class InsufficientAcceptance(PidsxError):
    """Rejection sampler kept too few draws for a usable estimate."""


class ConsistencyError(PidsxError):
    """Recomposed redundancies disagree with independently measured values."""

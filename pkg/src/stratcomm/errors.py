"""Exception hierarchy.

Everything raised on purpose derives from :class:`StratCommError`. Bad inputs
are :class:`DomainError` (also a ``ValueError``); failed self-checks are
:class:`InternalInconsistency`. The CLI maps the two families onto distinct
exit codes.
"""


class StratCommError(Exception):
    """Base class for all package errors."""


class DomainError(StratCommError, ValueError):
    """An argument lies outside the domain of the requested operation."""


class NotPositiveDefinite(DomainError):
    pass


class DegeneratePrivateInfo(DomainError):
    """``r_theta <= rho_xtheta**2``: theta carries no information beyond X."""


class NonpositiveVariance(DomainError):
    pass


class SingularConditioningBlock(DomainError):
    pass


# Same failure, named for the mutual-information entry point.
SingularBlock = SingularConditioningBlock


class OverlappingSets(DomainError):
    pass


class DimensionMismatch(DomainError):
    pass


class InvalidBracket(DomainError):
    pass


class InconsistentStrategy(DomainError):
    """Strategy uses side information the model does not provide."""


class NonFiniteEvaluation(StratCommError):
    """Objective returned NaN or infinity inside the search bracket."""


class BracketExpansionExceeded(StratCommError):
    """Argmin kept landing on the bracket edge after all allowed expansions."""


class InternalInconsistency(StratCommError):
    """Two independent computations of the same quantity disagree."""


class FixedPointNotConfirmed(InternalInconsistency):
    pass

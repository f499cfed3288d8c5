"""Exception hierarchy for the particle solver."""


class CharpartError(Exception):
    """Base class for all solver errors."""


class ConfigurationError(CharpartError, ValueError):
    """Invalid configuration or construction parameters."""


class DomainError(CharpartError, ValueError):
    """Argument outside the admissible range of an operation."""


class ConvexityError(CharpartError, ValueError):
    """An operation requiring a convex/concave value range straddles an inflection point."""


class OvershootError(CharpartError):
    """Particles were advanced past the next collision time."""


class MergeInfeasibleError(CharpartError):
    """The merge area condition could not be bracketed."""


class UnresolvedMergeError(CharpartError):
    """Entropy-fix retries were exhausted without an acceptable merge."""

    def __init__(self, message, events=None):
        super().__init__(message)
        self.events = events


class UnsupportedInteractionError(CharpartError):
    """Particle interaction outside the supported cases (e.g. two inflection particles)."""


class CFLViolationError(CharpartError):
    """Finite-volume time step violates the CFL bound."""

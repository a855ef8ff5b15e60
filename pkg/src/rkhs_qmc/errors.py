"""Exception hierarchy shared by all modules."""


class RkhsQmcError(Exception):
    """Base class for all library errors."""


class UnsupportedSpaceError(RkhsQmcError, ValueError):
    """A flavor / smoothness combination is not available for an operation."""


class DomainError(RkhsQmcError, ValueError):
    """Arguments lie outside the domain of an operation."""


class DiscretizationError(RkhsQmcError, RuntimeError):
    """A numerical oracle failed (singular system, residual too large, ...)."""


class PlanError(RkhsQmcError, ValueError):
    """An integration plan cannot be formed within the requested budget."""


class HypothesisError(RkhsQmcError, ValueError):
    """Parameters fall outside the validity range of a rate statement."""

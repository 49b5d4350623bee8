"""Exception types shared across the package."""


class IrscrError(Exception):
    """Base class for package errors."""


class MalformedProgramError(IrscrError, ValueError):
    """A conic program references undeclared variables or has bad structure."""


class DimensionMismatchError(IrscrError, ValueError):
    """Operands have inconsistent shapes."""


class NumericalFailureError(IrscrError):
    """The embedded solver stalled or its answer failed verification."""


class SubproblemInfeasibleError(IrscrError):
    """A convex subproblem reported a primal infeasibility certificate."""


class CcpStalledError(IrscrError):
    """The penalty procedure hit its iteration cap with slack above threshold."""


class RankOneViolationError(IrscrError):
    """An SDP solution violated the rank-one eigenvalue-ratio tolerance."""

    def __init__(self, ratio, tol):
        super().__init__(f"eigenvalue ratio {ratio:.3e} exceeds rank-one tolerance {tol:.1e}")
        self.ratio = ratio
        self.tol = tol


class BootstrapInfeasibleError(IrscrError):
    """Even the rate-only precoder bootstrap admits no solution."""


class InvalidGeometryError(IrscrError, ValueError):
    """Scenario geometry contains a zero-length link or bad exponent."""


class ConfigError(IrscrError, ValueError):
    """Experiment configuration failed to parse or validate."""

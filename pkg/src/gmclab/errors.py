"""Exception types shared across the package.

Every estimator precondition failure maps to one of these so callers
(and the CLI exit-code contract) can tell configuration mistakes apart
from genuine numerical trouble.
"""


class GmcLabError(Exception):
    """Base class for all package-specific errors."""


# --- geometry / kernel ------------------------------------------------------

class OutOfDomain(GmcLabError):
    """A point lies outside the domain or inside the excluded margin."""


class CoincidentPoints(GmcLabError):
    """Kernel requested on (or too close to) the diagonal."""


class CircleLeavesDomain(GmcLabError):
    """A circle used for averaging does not fit inside the domain."""


class NotNested(GmcLabError):
    """Sub-ball for the Markov decomposition is not contained in the domain."""


class NotPSD(GmcLabError):
    """A matrix that must be positive semidefinite is not (kernel bug)."""


# --- sampling ---------------------------------------------------------------

class FactorizationFailed(GmcLabError):
    """Covariance not factorizable even after the diagonal jitter ladder."""


class UnsupportedRadius(GmcLabError):
    """Circle-average radius not available for this sampling scheme."""


class UnsupportedScheme(GmcLabError):
    """Operation requires a different sampling scheme."""


class NonFiniteShift(GmcLabError):
    """Deterministic shift evaluates to NaN/inf on the grid."""


# --- measures ---------------------------------------------------------------

class SupercriticalGamma(GmcLabError):
    """|gamma| >= 2 requested; only the subcritical regime is supported."""


class MissingVariance(GmcLabError):
    """Field sample carries no variance information."""


class MismatchedGrids(GmcLabError):
    """Two fields/measures do not share the same grid."""


class NotDisk(GmcLabError):
    """Operation only defined on the disk domain."""


# --- estimators -------------------------------------------------------------

class BallTooSmallForGrid(GmcLabError):
    """Ball radius below the grid discretization floor."""


class BallLeavesDomain(GmcLabError):
    """Ball not contained in the (margin-reduced) domain."""


class AllCensored(GmcLabError):
    """No replica reached the requested tail level."""


class DegenerateMeasure(GmcLabError):
    """A single cell carries essentially all the mass."""


class OutOfL2Regime(GmcLabError):
    """|gamma| >= sqrt(2): second-moment diagnostics undefined."""


class WindowTooNarrow(GmcLabError):
    """Fit window contains too few usable scales."""


class MassUnreachable(GmcLabError):
    """Requested ball mass exceeds what is reachable inside the margin."""


class EmptyBall(GmcLabError):
    """Ball contains no grid cell."""


class UnknownConvexityTag(GmcLabError):
    """Test function not in the built-in convex/concave battery."""


# --- CLI / IO ---------------------------------------------------------------

class ConfigInvalid(GmcLabError):
    """Experiment configuration failed validation (message names the field)."""


class IoError(GmcLabError):
    """Report or curve file could not be written."""

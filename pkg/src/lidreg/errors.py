"""Exception types raised by the registration pipeline.

Grouped by failure class so the CLI can map them onto distinct exit codes:
configuration problems, missing/invalid inputs, degenerate data, and
non-convergence are all distinguishable by the caller.
"""


class LidregError(Exception):
    """Base class for every pipeline-specific error."""


class ConfigError(LidregError):
    """Bad configuration file or invalid parameter combination."""


class InputError(LidregError):
    """An input file is missing, unreadable, or malformed."""


class DegenerateDataError(LidregError):
    """Data that is structurally unusable for the requested operation."""


# --- camera geometry ---------------------------------------------------

class DegenerateProjection(DegenerateDataError):
    """Point lies on the camera's principal plane (homogeneous w = 0)."""


class SingularCamera(DegenerateDataError):
    """Projection matrix whose left 3x3 block is (numerically) singular."""


# --- extraction --------------------------------------------------------

class EmptyCloud(DegenerateDataError):
    """Point cloud has no points."""


class NoGroundPoints(DegenerateDataError):
    """No ground-classified points, so no ground level can be estimated."""


class EmptySegment(DegenerateDataError):
    """A pixel/point set that must be non-empty is empty."""


# --- matching ----------------------------------------------------------

class AmbiguousLargest(DegenerateDataError):
    """No uniquely dominant largest segment on one of the two sides."""


class TooFewMatches(DegenerateDataError):
    """Not enough correspondences for the graph filter."""


class EmptySet(DegenerateDataError):
    """An operation received an empty candidate set."""


# --- pose estimation ---------------------------------------------------

class TooFewCorrespondences(DegenerateDataError):
    """Fewer 3D-2D pairs than the estimator's minimum."""


class DegenerateConfiguration(DegenerateDataError):
    """Coplanar/collinear correspondence geometry; the DLT system is rank
    deficient and the camera cannot be recovered."""


# --- super-resolution --------------------------------------------------

class NoVisiblePoints(DegenerateDataError):
    """No point of the cloud projects inside the target frame."""


class FrameMismatch(DegenerateDataError):
    """Rasters that must share a frame do not."""


# --- similarity / fine registration -------------------------------------

class NotNormalized(DegenerateDataError):
    """A probability table whose mass does not sum to one."""


class DegenerateEntropy(DegenerateDataError):
    """Joint entropy is zero so a normalized measure is undefined."""


class FrameTooSmall(DegenerateDataError):
    """Frame smaller than a single patch."""


class EmptyPatchCloud(DegenerateDataError):
    """A patch received no LiDAR points."""


# --- synthetic scenes ----------------------------------------------------

class InvalidSpec(ConfigError):
    """Scene specification with impossible or inconsistent values."""


class UnknownBuilding(InputError):
    """Reference to a building id the scene does not contain."""

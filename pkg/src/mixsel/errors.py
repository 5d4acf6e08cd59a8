"""Exception taxonomy shared across the package.

Errors are grouped by the command-line exit code they map to: usage problems
(exit 1), data problems (exit 2), and verification failures (exit 3).
Numerical-degeneracy errors raised by library calls fall in the data group.
"""


class MixselError(Exception):
    """Base class for every error raised by this package."""


# ---------------------------------------------------------------------------
# usage / configuration


class ConfigError(MixselError):
    """Bad or inconsistent configuration supplied by the caller."""


class IllegalMove(MixselError):
    """A move was requested that is not defined at the current model."""


# ---------------------------------------------------------------------------
# data and numerical degeneracy


class DataError(MixselError):
    """Base class for problems with input data or numerical degeneracy."""


class ParseError(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class ZeroVarianceColumn(DataError):
    pass


class RankDeficient(DataError):
    """Requested column set is numerically rank deficient."""


class CollinearColumn(DataError):
    """A single added column is numerically collinear with the current set."""


class SizeExceeded(DataError):
    """Model size exceeds the hard cap; the posterior assigns it zero mass."""


class EmptyNeighborhood(DataError):
    """The selected move type has no candidates at the current model."""


class InitTooLarge(DataError):
    pass


class CollinearInit(DataError):
    pass


class ZeroVariance(DataError):
    """A chain statistic is constant, so no variance estimate exists."""


class SingularCovariance(DataError):
    pass


class QNotDividingP(DataError):
    pass


class SpaceTooLarge(DataError):
    """Enumeration of the model space would exceed the configured cap."""


class GramNotPD(DataError):
    pass


class TraceFormatError(DataError):
    pass


# ---------------------------------------------------------------------------
# verification


class VerificationError(MixselError):
    """Base class for failures of exact certification checks."""


class PreconditionViolated(VerificationError):
    """A hypothesis of the two-stage certificate fails; message names it."""


class BoundViolated(VerificationError):
    """An exact quantity exceeds its certified bound; message says where."""


class Nonconvergent(VerificationError):
    """A total-variation curve did not cross the target threshold in time."""


class Divergent(VerificationError):
    """A generating-function solve has no finite solution at this rate."""


class DecompositionInfeasible(VerificationError):
    """The residual-kernel split is not a valid stochastic decomposition."""

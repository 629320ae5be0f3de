"""Exception hierarchy shared by all biphoton_sync modules."""


class BiphotonSyncError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(BiphotonSyncError, ValueError):
    """A model, scenario, or configuration value violates its invariants."""


class UsageError(BiphotonSyncError):
    """An operation was called with inconsistent arguments (e.g. mismatched
    swap states, histograms with incompatible binning)."""


class ResolutionError(BiphotonSyncError):
    """The requested sampling grid is too coarse to resolve the correlation
    width (fewer than 16 points across the FWHM)."""


class NoPeakError(BiphotonSyncError):
    """A curve or histogram contains no usable peak."""


class FitError(BiphotonSyncError):
    """Model fit failed to converge. Carries the last chi-square value."""

    def __init__(self, message: str, last_chi2: float | None = None):
        super().__init__(message)
        self.last_chi2 = last_chi2


class RangeError(BiphotonSyncError, OverflowError):
    """A timestamp left the representable 64-bit femtosecond range."""


class ResourceLimitError(BiphotonSyncError):
    """The expected event or match count exceeds the configured cap."""


class RankDeficiencyError(BiphotonSyncError):
    """A joint solve was attempted with degenerate inputs (all path lengths
    equal, fewer than two points)."""


class DegenerateDispersionError(BiphotonSyncError):
    """The fiber dispersion is zero (or fitted to ~zero), so path-length and
    offset recovery is impossible."""


class DecodeError(BiphotonSyncError):
    """Base class for record-file decoding failures."""


class MagicMismatchError(DecodeError):
    """The file does not start with the expected magic bytes."""


class UnsupportedVersionError(DecodeError):
    """The file declares a format version this library cannot read."""


class TruncatedPayloadError(DecodeError):
    """The file is shorter (or longer) than its declared record count."""


class NonMonotoneTimestampsError(DecodeError):
    """Record timestamps are not nondecreasing."""


class ChecksumError(DecodeError):
    """The trailing CRC32 does not match the file contents."""

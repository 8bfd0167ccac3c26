"""Exception types shared across the package."""


class SemmapError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(SemmapError):
    """Bad scenario/configuration input (unknown keys, invalid values, missing files)."""


class OutOfBoundsError(SemmapError):
    """A point or pose lies outside the world or grid bounds."""


class UnknownIdError(SemmapError):
    """A scenario event references an object id that does not exist."""


class DuplicateIdError(SemmapError):
    """An object id is introduced twice."""


class EmptyCloudError(SemmapError):
    """An operation requiring a non-empty point cloud received an empty one."""


class MapFormatError(SemmapError):
    """A persisted map file could not be parsed; message carries the position."""


class MissingArtifactError(SemmapError):
    """A pipeline phase requires an artifact an earlier phase has not produced."""


class StuckError(SemmapError):
    """Exploration made no progress: the same target failed repeatedly with no alternative."""

"""Exception types shared across the toolkit.

Everything user-facing derives from ForensicsError so the CLI can map
input/usage problems to exit code 2 in one place.
"""


class ForensicsError(Exception):
    """Base class for errors caused by bad inputs or bad usage."""


class UnknownWaveletError(ForensicsError, ValueError):
    """Requested wavelet name is not in the registry."""


class SignalLengthError(ForensicsError, ValueError):
    """Signal too short (or badly shaped) for the requested transform."""


class LevelCountError(ForensicsError, ValueError):
    """Requested more decomposition levels than the input supports."""


class DecodeError(ForensicsError, ValueError):
    """Byte stream is not a decodable PNG/JPEG image."""


class ConfigError(ForensicsError, ValueError):
    """Run configuration is malformed or inconsistent."""


class DataError(ForensicsError, ValueError):
    """Dataset-level problem: missing directory, empty input, bad manifest."""


class WeightFormatError(ForensicsError, ValueError):
    """Weight file has the wrong magic or an unsupported version."""


class WeightCorruptionError(ForensicsError, ValueError):
    """Weight file fails its checksum or is truncated."""


class WeightShapeError(ForensicsError, ValueError):
    """Tensor table in a weight file disagrees with the architecture."""

"""Typed failures raised by the toolkit.

Every precondition violation maps to one of these so callers (and the CLI,
which translates them into exit codes) can tell input problems apart from
statistical preconditions that the data simply does not meet.
"""


class VoxtraitError(Exception):
    """Base class for all toolkit errors."""


class InputError(VoxtraitError):
    """Unusable input: bad files, bad arguments, malformed tables."""


class WavReadError(InputError):
    """File missing, truncated, or not a parseable RIFF/WAVE container."""


class NonPcmError(InputError):
    """WAV container holds something other than supported linear PCM."""


class EmptyAudioError(InputError):
    """WAV data chunk contains zero samples."""


class ClipTooShortError(InputError):
    """Clip shorter than one analysis frame."""


class DuplicateKeyError(InputError):
    """Two rows share a (speaker_id, session) or rating key."""


class TableFormatError(InputError):
    """CSV/JSON table does not match the documented schema."""


class StatsError(VoxtraitError):
    """A statistical precondition failed on otherwise valid input."""


class InsufficientDataError(StatsError):
    """Fewer usable rows/pairs than the procedure requires."""


class ZeroVarianceError(StatsError):
    """Paired differences have zero variance; t statistic undefined."""


class AllZeroDifferencesError(StatsError):
    """Every paired difference is zero; signed-rank test undefined."""


class ZeroVectorError(StatsError):
    """Cosine similarity asked for a zero-length direction."""


class ConstantColumnError(StatsError):
    """A column to be standardized has zero sample variance."""


class MissingFeatureError(StatsError):
    """A model predictor is absent from the supplied feature values."""

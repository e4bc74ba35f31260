"""Nonverbal speech descriptors, topic-shift statistics and rating models."""

from .audio_io import AudioClip, TARGET_RATE, load_wav, resample, write_wav
from .config import RunConfig, load_config
from .errors import (
    InputError,
    StatsError,
    VoxtraitError,
)
from .features import (
    FEATURE_NAMES,
    SESSIONS,
    FeatureTable,
    FeatureVector,
    extract_features,
    read_table_csv,
    write_table_csv,
)
from .regression import (
    RatingTable,
    RegressionModel,
    Thresholds,
    cross_session_eval,
    load_model,
    save_model,
    train_model,
)
from .segmentation import SegmentationResult, segment_clip
from .stats import (
    TRANSITIONS,
    SignificanceMatrix,
    TransitionVector,
    cosine_similarity,
    paired_t_test,
    significance_matrix,
    transition_vector,
    wilcoxon_signed_rank,
)

__version__ = "0.1.0"

__all__ = [
    "AudioClip",
    "FEATURE_NAMES",
    "FeatureTable",
    "FeatureVector",
    "InputError",
    "RatingTable",
    "RegressionModel",
    "RunConfig",
    "SESSIONS",
    "SegmentationResult",
    "SignificanceMatrix",
    "StatsError",
    "TARGET_RATE",
    "TRANSITIONS",
    "Thresholds",
    "TransitionVector",
    "VoxtraitError",
    "__version__",
    "cosine_similarity",
    "cross_session_eval",
    "extract_features",
    "load_config",
    "load_model",
    "load_wav",
    "paired_t_test",
    "read_table_csv",
    "resample",
    "save_model",
    "segment_clip",
    "significance_matrix",
    "train_model",
    "transition_vector",
    "wilcoxon_signed_rank",
    "write_table_csv",
    "write_wav",
]

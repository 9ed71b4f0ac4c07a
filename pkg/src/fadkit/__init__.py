"""Frechet Audio Distance toolkit over precomputed embedding frame sets."""

from .errors import (
    FadkitError,
    FadkitWarning,
    FormatError,
    NumericalError,
    ValidationError,
)
from .estimators import (
    FadInfEstimate,
    SongScore,
    SongScoreTable,
    fad_infinity,
    fad_set,
    fit_inverse_size_regression,
    outlier_report,
    per_song_scores,
    select_extremes,
)
from .gaussian import (
    FadScore,
    GaussianStats,
    accumulate,
    fit_frames,
    frechet_distance,
    load_stats_cache,
    merge,
    merge_tree,
    save_stats_cache,
)
from .metrics import (
    EFFECT_NAMES,
    LabelRecord,
    MosRecord,
    PrfResult,
    SensitivityReport,
    binarize_labels,
    pearson_by_testset,
    predict_labels,
    prf,
    sensitivity_normalize,
)
from .store import (
    EmbeddingFrameSet,
    EmbeddingModelInfo,
    MODEL_REGISTRY,
    SyntheticSpec,
    generate_synthetic,
    read_frameset,
    read_set,
    set_fingerprint,
    write_frameset,
    write_set,
)

__version__ = "0.1.0"

__all__ = [
    "EFFECT_NAMES",
    "EmbeddingFrameSet",
    "EmbeddingModelInfo",
    "FadInfEstimate",
    "FadScore",
    "FadkitError",
    "FadkitWarning",
    "FormatError",
    "GaussianStats",
    "LabelRecord",
    "MODEL_REGISTRY",
    "MosRecord",
    "NumericalError",
    "PrfResult",
    "SensitivityReport",
    "SongScore",
    "SongScoreTable",
    "SyntheticSpec",
    "ValidationError",
    "accumulate",
    "binarize_labels",
    "fad_infinity",
    "fad_set",
    "fit_frames",
    "fit_inverse_size_regression",
    "frechet_distance",
    "generate_synthetic",
    "load_stats_cache",
    "merge",
    "merge_tree",
    "outlier_report",
    "pearson_by_testset",
    "per_song_scores",
    "predict_labels",
    "prf",
    "read_frameset",
    "read_set",
    "save_stats_cache",
    "select_extremes",
    "sensitivity_normalize",
    "set_fingerprint",
    "write_frameset",
    "write_set",
]

"""Model selection: metrics, folds, cross validation, grid search, and
model-file persistence."""

from .folds import ClassTooSmall, TooManyFolds, kfold_split, stratified_kfold
from .metrics import (
    LengthMismatch,
    Metric,
    confusion,
    per_class_scores,
    selection_score,
    standard_recall,
)
from .persistence import (
    BadMagic,
    Truncated,
    VersionUnsupported,
    load_model,
    save_model,
)
from .pipeline import (
    DEFAULT_FOLDS,
    DEFAULT_SVD_K,
    FittedPipeline,
    FoldScore,
    GridCellResult,
    GridDefinition,
    GridPointResult,
    PipelineSpec,
    ScoreReport,
    Vectorizer,
    compare_equal_weighting,
    complexity_key,
    cross_validate,
    fit_pipeline_features,
    grid_search,
    objective,
    select_best_cell,
    train_final,
    train_model,
)

__all__ = [
    "BadMagic",
    "ClassTooSmall",
    "DEFAULT_FOLDS",
    "DEFAULT_SVD_K",
    "FittedPipeline",
    "FoldScore",
    "GridCellResult",
    "GridDefinition",
    "GridPointResult",
    "LengthMismatch",
    "Metric",
    "PipelineSpec",
    "ScoreReport",
    "TooManyFolds",
    "Truncated",
    "Vectorizer",
    "VersionUnsupported",
    "compare_equal_weighting",
    "complexity_key",
    "confusion",
    "cross_validate",
    "fit_pipeline_features",
    "grid_search",
    "kfold_split",
    "load_model",
    "objective",
    "per_class_scores",
    "save_model",
    "select_best_cell",
    "selection_score",
    "standard_recall",
    "stratified_kfold",
    "train_final",
    "train_model",
]

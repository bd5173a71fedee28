"""News-sentiment pipeline: dataset building, crowdsource label QA,
classifier selection under a false-positive-averse score, and a daily
sentiment-signal trading backtest."""

from .core import (
    BadDate,
    DatasetVariant,
    DimensionMismatch,
    MissingColumn,
    SentimentClass,
    SentitradeError,
)

__version__ = "0.1.0"

__all__ = [
    "BadDate",
    "DatasetVariant",
    "DimensionMismatch",
    "MissingColumn",
    "SentimentClass",
    "SentitradeError",
    "__version__",
]

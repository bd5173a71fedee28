"""The model-selection harness: preprocessing pipelines, cross validation,
grid search, and the equal-weighting comparison.

A pipeline is (vectorizer, optional SVD, model). Cross validation fits the
whole preprocessing chain on each fold's training rows only; grid search
evaluates every hyperparameter point of every family on every preprocessing
combination and keeps the best by the mean of the negative and positive
selection scores, breaking ties toward simpler models.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from enum import Enum
from itertools import product
from typing import Callable, Sequence

import numpy as np

from ..core import DatasetVariant, SentitradeError
from ..corpus import FeatureDataset
from ..features import (
    UNIGRAMS,
    UNIGRAMS_AND_BIGRAMS,
    FeatureMatrix,
    SvdTransform,
    TfidfTransform,
    apply_svd,
    apply_tfidf,
    fit_svd,
    fit_tfidf,
)
from ..models import (
    ModelFamily,
    ModelSpec,
    NonConvergence,
    NonNegativeRequired,
    TrainedModel,
    Weighting,
    equal_class_weights,
    predict,
    train_kmeans_classifier,
    train_logreg,
    train_mnb,
    train_rbf_svm,
)
from .folds import kfold_split, stratified_kfold
from .metrics import Metric, confusion, per_class_scores

DEFAULT_FOLDS = 10
DEFAULT_SVD_K = 100


class Vectorizer(Enum):
    UNIGRAM_BIGRAM = "bigram"
    UNIGRAM_ONLY = "unigram"

    @property
    def ngram_range(self):
        return UNIGRAMS_AND_BIGRAMS if self is Vectorizer.UNIGRAM_BIGRAM else UNIGRAMS


@dataclass(frozen=True)
class PipelineSpec:
    """A fully-specified training recipe for one dataset variant."""

    dataset_variant: DatasetVariant
    vectorizer: Vectorizer
    use_svd: bool
    svd_k: int | None
    model: ModelSpec

    def __post_init__(self) -> None:
        if self.use_svd != (self.svd_k is not None):
            raise ValueError("svd_k must be present exactly when use_svd is set")
        if self.svd_k is not None and self.svd_k < 1:
            raise ValueError("svd_k must be positive")

    def preprocessing_label(self) -> str:
        base = self.vectorizer.value
        return f"{base}+svd" if self.use_svd else base


@dataclass(frozen=True)
class GridDefinition:
    """Candidate hyperparameter values per family. Defaults cover the full
    range a small labeled corpus plausibly needs."""

    logreg_C: tuple[float, ...] = (1e-5, 1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0, 100.0)
    mnb_alpha: tuple[float, ...] = (0.01, 0.1, 1.0, 10.0, 100.0)
    svm_C: tuple[float, ...] = (1e-5, 1e-4, 1e-3, 0.01, 0.1, 1.0, 10.0, 100.0)
    svm_gamma: tuple[float, ...] = (1e-8, 1e-4, 0.01, 1.0, 10.0)
    kmeans_n: tuple[int, ...] = (3, 4, 5)

    def __post_init__(self) -> None:
        for name in ("logreg_C", "mnb_alpha", "svm_C", "svm_gamma", "kmeans_n"):
            if not getattr(self, name):
                raise ValueError(f"grid for {name} must be nonempty")

    def specs_for(self, family: ModelFamily, weighting: Weighting, seed: int) -> list[ModelSpec]:
        if family is ModelFamily.LOGREG:
            return [ModelSpec(family, C=c, class_weighting=weighting, seed=seed) for c in self.logreg_C]
        if family is ModelFamily.MNB:
            return [ModelSpec(family, alpha=a, class_weighting=weighting, seed=seed) for a in self.mnb_alpha]
        if family is ModelFamily.RBF_SVM:
            return [
                ModelSpec(family, C=c, gamma=g, class_weighting=weighting, seed=seed)
                for c, g in product(self.svm_C, self.svm_gamma)
            ]
        return [ModelSpec(family, n_clusters=n, class_weighting=weighting, seed=seed) for n in self.kmeans_n]


@dataclass(frozen=True)
class FittedPipeline:
    """A trained model plus the preprocessing fitted with it."""

    spec: PipelineSpec
    tfidf: TfidfTransform
    svd: SvdTransform | None
    model: TrainedModel

    def transform(self, texts: Sequence[str]) -> FeatureMatrix:
        X = apply_tfidf(self.tfidf, list(texts))
        if self.svd is not None:
            X = apply_svd(self.svd, X)
        return X

    def predict_texts(self, texts: Sequence[str]) -> np.ndarray:
        return predict(self.model, self.transform(texts))


@dataclass(frozen=True)
class FoldScore:
    fold_index: int
    test_indices: np.ndarray
    cm: np.ndarray
    eq1: np.ndarray  # per-class selection scores
    recall: np.ndarray  # per-class standard recall
    tfidf: TfidfTransform
    svd: SvdTransform | None


@dataclass(frozen=True)
class ScoreReport:
    """Per-class means across folds, both metrics, plus the per-fold
    breakdown (which keeps the fold-fitted transforms for leakage audits)."""

    spec: PipelineSpec
    eq1_mean: np.ndarray
    recall_mean: np.ndarray
    folds: tuple[FoldScore, ...]

    def scores(self, metric: Metric) -> np.ndarray:
        return self.eq1_mean if metric is Metric.EQ1 else self.recall_mean


def objective(report: ScoreReport, metric: Metric = Metric.EQ1) -> float:
    """Mean of the negative-class and positive-class scores, the quantity
    grid search maximizes."""
    scores = report.scores(metric)
    return float((scores[0] + scores[2]) / 2.0)


def _labels_array(dataset: FeatureDataset) -> np.ndarray:
    labels = dataset.labels()
    if any(label is None for label in labels):
        raise ValueError("dataset has unlabeled rows; attach labels first")
    return np.array([int(label) for label in labels])


def _resample_to_smallest_class(y: np.ndarray, seed: int) -> np.ndarray:
    """Indices of a class-balanced subsample (the equal-weighting stand-in
    for K-Means, which has no weighted variant)."""
    rng = np.random.default_rng(seed)
    classes, counts = np.unique(y, return_counts=True)
    smallest = counts.min()
    keep: list[int] = []
    for cls in classes:
        members = np.flatnonzero(y == cls)
        keep.extend(int(i) for i in rng.permutation(members)[:smallest])
    return np.array(sorted(keep))


def fit_pipeline_features(
    texts: Sequence[str], spec: PipelineSpec
) -> tuple[TfidfTransform, SvdTransform | None, FeatureMatrix]:
    tfidf = fit_tfidf(list(texts), spec.vectorizer.ngram_range)
    X = apply_tfidf(tfidf, list(texts))
    svd = None
    if spec.use_svd:
        svd = fit_svd(X, spec.svd_k)
        X = apply_svd(svd, X)
    return tfidf, svd, X


def train_model(spec: ModelSpec, X: FeatureMatrix, y: np.ndarray) -> TrainedModel:
    """Train one model per its spec, applying the configured weighting."""
    weights = None
    if spec.class_weighting is Weighting.EQUAL_CLASS and spec.family is not ModelFamily.KMEANS:
        weights = equal_class_weights(y)
    if spec.family is ModelFamily.LOGREG:
        trained = train_logreg(X, y, C=spec.C, weights=weights, seed=spec.seed)
    elif spec.family is ModelFamily.MNB:
        trained = train_mnb(X, y, alpha=spec.alpha, weights=weights, seed=spec.seed)
    elif spec.family is ModelFamily.RBF_SVM:
        trained = train_rbf_svm(X, y, C=spec.C, gamma=spec.gamma, weights=weights, seed=spec.seed)
    else:
        if spec.class_weighting is Weighting.EQUAL_CLASS:
            keep = _resample_to_smallest_class(y, spec.seed)
            X, y = X[keep], y[keep]
        trained = train_kmeans_classifier(X, y, n_clusters=spec.n_clusters, seed=spec.seed)
    # Keep the caller's full spec (weighting included) on the trained model.
    return TrainedModel(spec=spec, params=trained.params)


def cross_validate(
    spec: PipelineSpec,
    dataset: FeatureDataset,
    k: int = DEFAULT_FOLDS,
    seed: int = 0,
    folds: Sequence[np.ndarray] | None = None,
) -> ScoreReport:
    """k-fold evaluation; preprocessing is fitted on each fold's training
    rows only. Training errors propagate annotated with the fold index."""
    texts = dataset.texts()
    y = _labels_array(dataset)
    if folds is None:
        folds = kfold_split(len(texts), k, seed)
    fold_scores = []
    for fold_index, test_idx in enumerate(folds):
        test_mask = np.zeros(len(texts), dtype=bool)
        test_mask[test_idx] = True
        train_texts = [t for t, held in zip(texts, test_mask) if not held]
        test_texts = [t for t, held in zip(texts, test_mask) if held]
        y_train, y_test = y[~test_mask], y[test_mask]
        try:
            tfidf, svd, X_train = fit_pipeline_features(train_texts, spec)
            model = train_model(spec.model, X_train, y_train)
            X_test = apply_tfidf(tfidf, test_texts)
            if svd is not None:
                X_test = apply_svd(svd, X_test)
            y_pred = predict(model, X_test)
        except NonConvergence as exc:
            raise NonConvergence(f"fold {fold_index}: {exc}", residual=exc.residual) from exc
        except SentitradeError as exc:
            raise exc.__class__(f"fold {fold_index}: {exc}") from exc
        cm = confusion(y_test, y_pred)
        fold_scores.append(
            FoldScore(
                fold_index=fold_index,
                test_indices=np.asarray(test_idx),
                cm=cm,
                eq1=per_class_scores(cm, Metric.EQ1),
                recall=per_class_scores(cm, Metric.STANDARD_RECALL),
                tfidf=tfidf,
                svd=svd,
            )
        )
    eq1_mean = np.mean([f.eq1 for f in fold_scores], axis=0)
    recall_mean = np.mean([f.recall for f in fold_scores], axis=0)
    return ScoreReport(spec=spec, eq1_mean=eq1_mean, recall_mean=recall_mean, folds=tuple(fold_scores))


def complexity_key(spec: PipelineSpec) -> tuple:
    """Tie-break order: fewer SVD dimensions (none counts as zero), then
    smaller C, gamma, alpha, n_clusters, then family name."""
    m = spec.model
    return (
        spec.svd_k if spec.use_svd else 0,
        m.C or 0.0,
        m.gamma or 0.0,
        m.alpha or 0.0,
        m.n_clusters or 0,
        m.family.value,
    )


@dataclass(frozen=True)
class GridPointResult:
    spec: PipelineSpec
    objective: float | None  # None when training failed
    error: str | None = None


@dataclass(frozen=True)
class GridCellResult:
    """Best spec for one (variant, preprocessing, family) cell."""

    variant: DatasetVariant
    vectorizer: Vectorizer
    use_svd: bool
    family: ModelFamily
    best: ScoreReport | None
    best_objective: float | None
    points: tuple[GridPointResult, ...]
    error: str | None = None  # set when every grid point failed


def _map_ordered(fn: Callable, items: Sequence, jobs: int) -> list:
    if jobs <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def grid_search(
    dataset: FeatureDataset,
    preprocessings: Sequence[tuple[Vectorizer, bool]],
    grid: GridDefinition | None = None,
    k: int = DEFAULT_FOLDS,
    seed: int = 0,
    metric: Metric = Metric.EQ1,
    svd_k: int = DEFAULT_SVD_K,
    weighting: Weighting = Weighting.NONE,
    jobs: int = 1,
    families: Sequence[ModelFamily] = tuple(ModelFamily),
) -> list[GridCellResult]:
    """Evaluate every grid point of every family on every preprocessing
    combination, returning one winner per cell.

    The winner maximizes the negative/positive mean of the chosen metric;
    exact ties go to the smaller complexity_key. Multinomial NB on
    SVD-reduced features is mathematically undefined (negative values);
    those grid points are recorded as failed rather than aborting the
    search. The result does not depend on grid enumeration order.
    """
    grid = grid or GridDefinition()
    cells = []
    for vectorizer, use_svd in preprocessings:
        for family in families:
            specs = [
                PipelineSpec(
                    dataset_variant=dataset.variant,
                    vectorizer=vectorizer,
                    use_svd=use_svd,
                    svd_k=svd_k if use_svd else None,
                    model=model_spec,
                )
                for model_spec in grid.specs_for(family, weighting, seed)
            ]

            def evaluate(spec: PipelineSpec):
                try:
                    report = cross_validate(spec, dataset, k=k, seed=seed)
                except NonNegativeRequired as exc:
                    return GridPointResult(spec=spec, objective=None, error=str(exc)), None
                return GridPointResult(spec=spec, objective=objective(report, metric)), report

            outcomes = _map_ordered(evaluate, specs, jobs)
            points = tuple(point for point, _ in outcomes)
            scored = [(point, report) for point, report in outcomes if point.objective is not None]
            if scored:
                best_point, best_report = min(
                    scored, key=lambda pair: (-pair[0].objective, complexity_key(pair[0].spec))
                )
                cells.append(
                    GridCellResult(
                        variant=dataset.variant,
                        vectorizer=vectorizer,
                        use_svd=use_svd,
                        family=family,
                        best=best_report,
                        best_objective=best_point.objective,
                        points=points,
                    )
                )
            else:
                reason = points[0].error if points else "empty grid"
                cells.append(
                    GridCellResult(
                        variant=dataset.variant,
                        vectorizer=vectorizer,
                        use_svd=use_svd,
                        family=family,
                        best=None,
                        best_objective=None,
                        points=points,
                        error=reason,
                    )
                )
    return cells


def select_best_cell(cells: Sequence[GridCellResult], metric: Metric = Metric.EQ1) -> GridCellResult:
    """The overall winner across cells, same objective and tie-break rule."""
    viable = [cell for cell in cells if cell.best is not None]
    if not viable:
        raise SentitradeError("no grid cell produced a trainable model")
    return min(viable, key=lambda cell: (-cell.best_objective, complexity_key(cell.best.spec)))


def compare_equal_weighting(
    spec: PipelineSpec,
    dataset: FeatureDataset,
    seed: int = 0,
    metric: Metric = Metric.EQ1,
) -> tuple[Weighting, float, float]:
    """Stratified 3-fold comparison of the spec with and without equal class
    weighting. Returns (chosen weighting, unweighted score, weighted score);
    ties keep the unweighted model."""
    y = _labels_array(dataset)
    folds = stratified_kfold(y, 3, seed)
    plain_spec = replace(spec, model=replace(spec.model, class_weighting=Weighting.NONE))
    weighted_spec = replace(spec, model=replace(spec.model, class_weighting=Weighting.EQUAL_CLASS))
    plain = objective(cross_validate(plain_spec, dataset, folds=folds), metric)
    weighted = objective(cross_validate(weighted_spec, dataset, folds=folds), metric)
    chosen = Weighting.EQUAL_CLASS if weighted > plain else Weighting.NONE
    return chosen, plain, weighted


def train_final(spec: PipelineSpec, dataset: FeatureDataset) -> FittedPipeline:
    """Fit preprocessing and model on the entire labeled dataset."""
    texts = dataset.texts()
    y = _labels_array(dataset)
    tfidf, svd, X = fit_pipeline_features(texts, spec)
    model = train_model(spec.model, X, y)
    return FittedPipeline(spec=spec, tfidf=tfidf, svd=svd, model=model)

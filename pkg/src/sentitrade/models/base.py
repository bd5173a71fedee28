"""Model specs, trained-model containers, sample weighting, and the shared
predict() entry point for the four classifier families."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from ..core import DimensionMismatch, SentitradeError
from ..features import FeatureMatrix

N_CLASSES = 3


class ModelFamily(Enum):
    LOGREG = "logreg"
    MNB = "mnb"
    RBF_SVM = "rbf_svm"
    KMEANS = "kmeans"


class Weighting(Enum):
    NONE = "none"
    EQUAL_CLASS = "equal_class"


class SingleClass(SentitradeError):
    """Training data contained fewer than two classes."""


class NonNegativeRequired(SentitradeError):
    """Multinomial NB is undefined on negative feature values (this is what
    SVD-reduced features look like)."""


class NonConvergence(SentitradeError):
    """An iterative solver hit its update cap; .residual holds the remaining
    optimality violation."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class TooManyClusters(SentitradeError):
    """n_clusters exceeded the number of training rows."""


_FAMILY_PARAMS = {
    ModelFamily.LOGREG: ("C",),
    ModelFamily.MNB: ("alpha",),
    ModelFamily.RBF_SVM: ("C", "gamma"),
    ModelFamily.KMEANS: ("n_clusters",),
}


@dataclass(frozen=True)
class ModelSpec:
    """One classifier configuration. Hyperparameters must be present exactly
    for the named family."""

    family: ModelFamily
    C: float | None = None
    gamma: float | None = None
    alpha: float | None = None
    n_clusters: int | None = None
    class_weighting: Weighting = Weighting.NONE
    seed: int = 0

    def __post_init__(self) -> None:
        wanted = _FAMILY_PARAMS[self.family]
        for name in ("C", "gamma", "alpha", "n_clusters"):
            value = getattr(self, name)
            if name in wanted:
                if value is None:
                    raise ValueError(f"{self.family.value} requires {name}")
                if value <= 0:
                    raise ValueError(f"{name} must be positive")
            elif value is not None:
                raise ValueError(f"{self.family.value} does not take {name}")

    def hyperparameters(self) -> dict[str, float | int]:
        return {name: getattr(self, name) for name in _FAMILY_PARAMS[self.family]}


@dataclass(frozen=True)
class LogRegParams:
    weights: np.ndarray  # (3, d)
    bias: np.ndarray  # (3,)
    n_iterations: int = 0
    grad_inf_norm: float = float("nan")
    objective_history: tuple[float, ...] = ()


@dataclass(frozen=True)
class MnbParams:
    log_prior: np.ndarray  # (3,), -inf for classes absent in training
    log_likelihood: np.ndarray  # (3, d)


@dataclass(frozen=True)
class BinarySvm:
    """One one-vs-rest subproblem: support vectors and their dual weights."""

    positive_class: int
    support_vectors: np.ndarray  # (m, d)
    dual_coef: np.ndarray  # (m,) = alpha_i * y_i
    intercept: float
    support_indices: np.ndarray | None = None  # training-row indices (diagnostic)
    alphas: np.ndarray | None = None  # (m,) raw duals (diagnostic)
    box: np.ndarray | None = None  # (m,) per-sample upper bounds (diagnostic)
    kkt_residual: float | None = None
    n_updates: int | None = None


@dataclass(frozen=True)
class SvmParams:
    gamma: float
    binaries: tuple[BinarySvm | None, ...]  # indexed by class, None if absent


@dataclass(frozen=True)
class KMeansParams:
    centroids: np.ndarray  # (n_clusters, d)
    cluster_to_class: np.ndarray  # (n_clusters,) int
    inertia_history: tuple[float, ...] = ()
    n_iterations: int = 0


@dataclass(frozen=True)
class TrainedModel:
    spec: ModelSpec
    params: object  # one of the *Params dataclasses above

    @property
    def n_features(self) -> int:
        p = self.params
        if isinstance(p, LogRegParams):
            return p.weights.shape[1]
        if isinstance(p, MnbParams):
            return p.log_likelihood.shape[1]
        if isinstance(p, SvmParams):
            for binary in p.binaries:
                if binary is not None:
                    return binary.support_vectors.shape[1]
            raise ValueError("SVM model has no trained subproblem")
        if isinstance(p, KMeansParams):
            return p.centroids.shape[1]
        raise TypeError(f"unknown params type {type(p).__name__}")


def equal_class_weights(y) -> np.ndarray:
    """Per-sample weights that give every present class equal total mass:
    a sample of class c weighs n / (K_present * n_c)."""
    y = np.asarray(y, dtype=int)
    if y.size == 0:
        raise ValueError("no samples")
    classes, counts = np.unique(y, return_counts=True)
    per_class = {c: y.size / (len(classes) * n) for c, n in zip(classes, counts)}
    return np.array([per_class[c] for c in y])


def _check_width(X: FeatureMatrix, model: TrainedModel) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != model.n_features:
        raise DimensionMismatch(
            f"model expects {model.n_features} features, got "
            f"{X.shape[1] if X.ndim == 2 else X.shape}"
        )
    return X


def decision_values(model: TrainedModel, X: FeatureMatrix) -> np.ndarray:
    """Per-class scores, shape (n, 3); predict() takes the argmax. For
    K-Means the score is the negated distance to the nearest centroid of
    each mapped class."""
    X = _check_width(X, model)
    p = model.params
    if isinstance(p, LogRegParams):
        return X @ p.weights.T + p.bias
    if isinstance(p, MnbParams):
        return p.log_prior + X @ p.log_likelihood.T
    if isinstance(p, SvmParams):
        from .svm import svm_decision_values

        return svm_decision_values(p, X)
    if isinstance(p, KMeansParams):
        from .kmeans import kmeans_decision_values

        return kmeans_decision_values(p, X)
    raise TypeError(f"unknown params type {type(p).__name__}")


def predict(model: TrainedModel, X: FeatureMatrix) -> np.ndarray:
    """Predicted class ids (sentiment ordinals 0/1/2); ties go to the lower
    class index. K-Means predicts the mapped class of the nearest centroid."""
    X = _check_width(X, model)
    p = model.params
    if isinstance(p, KMeansParams):
        from .kmeans import kmeans_predict

        return kmeans_predict(p, X)
    return np.argmax(decision_values(model, X), axis=1)
